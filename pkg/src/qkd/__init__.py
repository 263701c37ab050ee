"""QKD component for direct-reconciliation heterodyne key rates"""
