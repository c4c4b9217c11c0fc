# Exact Finite-Problem Bounds Plugin
