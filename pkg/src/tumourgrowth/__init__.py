"""Cahn-Hilliard tumour growth with active nutrient transport."""
__version__ = "0.1.0"
