# Monte Carlo Lab Plugin
