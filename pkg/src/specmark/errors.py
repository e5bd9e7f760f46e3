"""Exception types shared across the package.

Each class carries the CLI exit code it maps to.
"""


class SpecMarkError(Exception):
    exit_code = 1


class ConfigError(SpecMarkError, ValueError):
    exit_code = 2


class ImageIOError(SpecMarkError, OSError):
    exit_code = 3


class UnreadableImageError(ImageIOError):
    pass


class UnsupportedImageError(ImageIOError):
    """Bit depth, alpha channel or channel count the codec cannot handle."""


class CapacityError(SpecMarkError, ValueError):
    exit_code = 4


class DivergenceError(SpecMarkError, RuntimeError):
    exit_code = 5

    def __init__(self, msg, checkpoint=None, step=None):
        super().__init__(msg)
        self.checkpoint = checkpoint
        self.step = step
