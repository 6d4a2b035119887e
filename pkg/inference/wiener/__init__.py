# Integrated Wiener process simulation
