# Simulation harness
