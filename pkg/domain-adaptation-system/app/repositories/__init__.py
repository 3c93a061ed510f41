"""
Data Access Layer (Repositories)
"""
