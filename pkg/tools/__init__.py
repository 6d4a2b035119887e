# Data Tools
