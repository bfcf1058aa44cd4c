"""Riichi mahjong workbench: rules engine, records, features, policies, play."""

__version__ = "0.1.0"
