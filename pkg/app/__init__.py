# app/__init__.py
"""
Rebalanceo robusto de flotas AMoD - pronóstico, optimización y simulación
"""
