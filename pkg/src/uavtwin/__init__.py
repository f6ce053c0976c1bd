"""Desk-scale digital twin of a distributed radar and emitter UAV localization testbed."""
