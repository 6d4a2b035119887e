# Spline smoothing
