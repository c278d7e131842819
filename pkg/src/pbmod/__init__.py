"""Bit-accurate model of a programmable QPSK / pi/4-DQPSK / DQPSK / OQPSK baseband modulator."""
from .mapper import BitPair, DiffState, IqSymbol, Level, Scheme
from .modulator import IfStream, ModConfig, Modulator, configure, modulate
from .pulseshape import FilterBank, SymbolWindow

__all__ = [
    "BitPair",
    "DiffState",
    "FilterBank",
    "IfStream",
    "IqSymbol",
    "Level",
    "ModConfig",
    "Modulator",
    "Scheme",
    "SymbolWindow",
    "configure",
    "modulate",
]
__version__ = "0.1.0"
