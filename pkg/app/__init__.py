# RabiVV: espectro e dinâmica do modelo de Rabi quântico.

__version__ = "1.0.0"
