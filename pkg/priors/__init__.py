"""Prior-based estimators and enhancers."""
