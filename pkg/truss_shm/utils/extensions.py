import importlib
import inspect
import pkgutil
from collections.abc import Iterator
from typing import NoReturn

from truss_shm import exts


def unqualify(name: str) -> str:
    """Return an unqualified name given a qualified module/package `name`."""
    return name.rsplit(".", maxsplit=1)[-1]


def _is_command_module(module: pkgutil.ModuleInfo) -> bool:
    if unqualify(module.name).startswith("_"):
        return False
    if not module.ispkg:
        return True
    # A package only counts when it has its own setup; otherwise it just groups modules
    package = importlib.import_module(module.name)
    return inspect.isfunction(getattr(package, "setup", None))


def walk_extensions() -> Iterator[str]:
    """Yield the names of the command modules under `truss_shm.exts`, sorted by full name."""

    def on_error(name: str) -> NoReturn:
        raise ImportError(name=name)  # pragma: no cover

    found = pkgutil.walk_packages(exts.__path__, f"{exts.__name__}.", onerror=on_error)
    for module in sorted(found, key=lambda info: info.name):
        if _is_command_module(module):
            yield module.name
