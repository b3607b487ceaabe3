# File: commands/__init__.py
# Este arquivo torna a pasta "commands" um pacote Python.
