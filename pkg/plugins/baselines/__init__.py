# Baseline Bounds Plugin
