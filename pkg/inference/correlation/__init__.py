# Partial correlation
