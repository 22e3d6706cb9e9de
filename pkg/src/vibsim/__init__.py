"""Qubit and qudit simulation of molecular vibrational dynamics."""
