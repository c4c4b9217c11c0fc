# Model Zoo Plugin
