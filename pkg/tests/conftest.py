from __future__ import annotations

import textwrap

import pytest

# fake compiler scripts; each treats its last argument as the source
# file so default flags can ride along untouched

OK_BODY = """
exit 0
"""

ARTIFACT_BODY = """
touch out.o
exit 0
"""

ERROR_BODY = """
echo "error[E0308]: mismatched types" >&2
exit 1
"""

ICE_BODY = """
cat >&2 <<'EOF'
error: internal compiler error: broken MIR in DefId(0:3 ~ demo[717c]::main)
thread 'rustc' panicked at compiler/rustc_errors/src/lib.rs:987:10:
Box<dyn Any>
stack backtrace:
   0: std::panicking::begin_panic::h1111111111111111
   1: rustc_middle::ty::relate::super_relate_tys::h2222222222222222
   2: rustc_hir_typeck::check::check_fn::h3333333333333333
EOF
exit 101
"""

MRUSTC_ICE_BODY = """
echo "BUG: ./src/hir_typeck/expr_cs.cpp:1234: Spare rule - ty l=..." >&2
echo "Aborted (core dumped)" >&2
exit 134
"""

SLEEPER_BODY = """
sleep 30
exit 0
"""

TRIGGER_BODY = """
for a in "$@"; do src="$a"; done
if grep -q "0xBUG" "$src"; then
  cat >&2 <<'EOF'
error: internal compiler error: seeded failure
thread 'rustc' panicked at compiler/rustc_demo/src/lib.rs:1:1:
seeded
stack backtrace:
   0: seeded::frame_one::h0000000000000000
   1: seeded::frame_two::h0000000000000001
EOF
  exit 101
fi
if grep -q "SLOWMARK" "$src"; then
  sleep 30
fi
if grep -q "ERRMARK" "$src"; then
  echo "error[E0999]: rejected on purpose" >&2
  exit 1
fi
exit 0
"""

TIMEPASS_HANG_BODY = """
echo "time:   0.001; rss: 50MB -> 51MB (   +1MB)  parse_crate" >&2
echo "time:   0.002   expand_crate" >&2
echo "time:   0.003   type_check" >&2
sleep 30
exit 0
"""


@pytest.fixture
def scripted(tmp_path):
    """Factory writing fake compiler executables into tmp_path."""

    def make(name: str, body: str) -> str:
        path = tmp_path / name
        path.write_text("#!/bin/sh\n" + textwrap.dedent(body).lstrip("\n"))
        path.chmod(0o755)
        return str(path)

    return make


# --- acceptance summary: one pass/fail line per criterion ---------------------

_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _acceptance_results[name] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup":
        if report.skipped:
            _acceptance_results[name] = "SKIP"
        elif report.failed:
            _acceptance_results[name] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_acceptance_results):
        terminalreporter.write_line(f"{name}: {_acceptance_results[name]}")
