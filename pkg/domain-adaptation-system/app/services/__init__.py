"""
Adaptation, kernel, selection, benchmark, evaluation and report services
"""
