# File: services/__init__.py
# Este arquivo torna a pasta "services" um pacote Python.
# Núcleo numérico: geometria do canal, solução assintótica, camadas e solvers.
