# Inference Package
