"""
Core module for the adaptation toolkit
Contains exceptions, logging, error handlers and numerical primitives
"""
