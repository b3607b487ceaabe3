# File: utils/__init__.py
# Este arquivo torna a pasta "utils" um pacote Python.
# Configuração, relatórios e erros compartilhados pelos comandos.
