"""Built-in run presets."""

from .presets import BUILTIN_PRESETS, get_preset, preset_overrides

__all__ = ["BUILTIN_PRESETS", "get_preset", "preset_overrides"]
