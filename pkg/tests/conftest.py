import ctypes
import ctypes.util

ACCEPTANCE_LINES: list[str] = []


def _keep_freed_memory():
    # glibc returns large freed blocks to the OS, so every big numpy temporary
    # page-faults afresh; keeping them mapped halves the training-loop runtime
    name = ctypes.util.find_library("c")
    if not name:
        return
    try:
        libc = ctypes.CDLL(name)
        libc.mallopt(-1, 1 << 30)  # M_TRIM_THRESHOLD
        libc.mallopt(-3, 1 << 30)  # M_MMAP_THRESHOLD
    except (OSError, AttributeError):
        pass


_keep_freed_memory()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
