"""Monitor component for the run ledger of post-selections"""
