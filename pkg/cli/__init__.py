# File: cli/__init__.py
# Este arquivo torna a pasta "cli" um pacote Python.
