from . import functional, gradcheck

__all__ = ["functional", "gradcheck"]
