# Langevin Dynamics Plugin
