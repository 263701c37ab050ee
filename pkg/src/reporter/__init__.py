"""Reporter component for JSON reports and CSV tables"""
