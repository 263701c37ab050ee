"""Logger component for logging experiment runs"""
