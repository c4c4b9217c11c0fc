# Hypothesis-Testing Prior Plugin
