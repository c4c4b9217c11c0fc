# Shared runtime helpers (errors, logging, serialization, resource guards)
