"""Soliton Collision Lab application package"""
