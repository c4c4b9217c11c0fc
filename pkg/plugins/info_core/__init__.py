# Exact Information Quantities Plugin
