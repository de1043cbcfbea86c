"""Register-level emulation of the MPK protection scheme.

Models the 32-bit permission register (16 keys, two bits each: Write
Disable at bit 2k+1, Access Disable at bit 2k), the reserved data-plane key
(key 15, bits 31:30), the restricted permission-register write instruction,
and the entry/exit call gate between the application and data-plane
domains.  Instruction addresses are abstract 64-bit tokens: the mechanism
depends only on instruction-pointer equality, so no ISA emulation is
needed.

A trace verifier replays sequences of register writes and tagged memory
accesses and reports every privilege-escalation attempt.
"""

from dataclasses import dataclass, replace

CKEY = 15
CKEY_MASK = 0b11 << 30  # AD | WD bits of the data-plane key
LOW30_MASK = (1 << 30) - 1
APP_MODE = "application"
DP_MODE = "dataplane"


class ProtectionError(Exception):
    pass


class GeneralProtectionFault(ProtectionError):
    """Models #GP(0): ECX or EDX nonzero on a permission-register write."""


@dataclass(frozen=True)
class PkruState:
    bits: int = 0xFFFFFFFF

    def __post_init__(self):
        if not 0 <= self.bits <= 0xFFFFFFFF:
            raise ValueError("PKRU is a 32-bit register")

    def ad(self, key):
        return (self.bits >> (2 * key)) & 1

    def wd(self, key):
        return (self.bits >> (2 * key + 1)) & 1

    def ckey_bits(self):
        return (self.bits >> 30) & 0b11


@dataclass(frozen=True)
class GateRegisters:
    """The two reserved control registers holding the gate instruction
    addresses.  Only the simulated control plane constructs these; simulated
    user code gets no mutation path (the dataclass is frozen)."""

    entry_addr: int
    exit_addr: int


@dataclass(frozen=True)
class WrpkruAttempt:
    rip: int
    eax: int
    ecx: int = 0
    edx: int = 0


@dataclass(frozen=True)
class DomainContext:
    mode: str = APP_MODE
    saved_thread_context: object = None
    stack: str = "app_stack"


def wrpkru(state, attempt, gates):
    """Apply one permission-register write attempt.

    Nonzero ECX/EDX faults.  At a gate address the full 32 bits are
    written; anywhere else only the lower 30 bits are written and the
    data-plane key bits are preserved.
    """
    if attempt.ecx != 0 or attempt.edx != 0:
        raise GeneralProtectionFault(f"#GP(0) at rip={attempt.rip:#x}")
    eax = attempt.eax & 0xFFFFFFFF
    if attempt.rip == gates.entry_addr or attempt.rip == gates.exit_addr:
        return PkruState(bits=eax)
    return PkruState(bits=(state.bits & ~LOW30_MASK) | (eax & LOW30_MASK))


def check_access(state, key, kind):
    """MPK access check: read needs AD=0, write needs AD=0 and WD=0.
    Execution is never gated by MPK."""
    if not 0 <= key <= 15:
        raise ValueError(f"key must be in 0..15, got {key}")
    if kind == "execute":
        return True
    if kind == "read":
        return state.ad(key) == 0
    if kind == "write":
        return state.ad(key) == 0 and state.wd(key) == 0
    raise ValueError(f"unknown access kind: {kind!r}")


def dpcall_enter(ctx, gates, state, cost=None):
    """Application -> data-plane gate crossing.

    Clears the data-plane key bits via the entry-gate write, saves the
    thread context, and switches to the data-plane stack.  The crossing is
    atomic with respect to simulated preemption accounting.  Returns
    (ctx, state, elapsed_ns).
    """
    if ctx.mode != APP_MODE:
        raise ProtectionError("dpcall_enter while already in dataplane mode")
    new_state = wrpkru(
        state,
        WrpkruAttempt(rip=gates.entry_addr, eax=state.bits & ~CKEY_MASK),
        gates,
    )
    new_ctx = DomainContext(
        mode=DP_MODE, saved_thread_context=(state.bits, ctx), stack="dp_stack"
    )
    elapsed = cost.gate_switch_ns if cost is not None else 0
    return new_ctx, new_state, elapsed


def dpcall_exit(ctx, gates, state, cost=None):
    """Data-plane -> application gate crossing; exact inverse of enter."""
    if ctx.mode != DP_MODE:
        raise ProtectionError("dpcall_exit from application mode")
    saved_bits, saved_ctx = ctx.saved_thread_context
    new_state = wrpkru(
        state,
        WrpkruAttempt(rip=gates.exit_addr, eax=state.bits | CKEY_MASK),
        gates,
    )
    # Restore the pre-enter lower bits exactly (the gate only touches ckey).
    new_state = PkruState(bits=(saved_bits & LOW30_MASK) | (new_state.bits & ~LOW30_MASK))
    new_ctx = replace(saved_ctx, mode=APP_MODE, stack="app_stack")
    elapsed = cost.gate_switch_ns if cost is not None else 0
    return new_ctx, new_state, elapsed


# --- trace verification -----------------------------------------------------
#
# Trace records are tagged tuples:
#   ("wrpkru", WrpkruAttempt)
#   ("mem", mode, key, kind)        kind in {"read", "write", "execute"}
#   ("stack_switch", target)        target in {"app_stack", "dp_stack"}
#   ("app_insn",)                   any application-code instruction

@dataclass(frozen=True)
class Violation:
    index: int
    reason: str


def verify_gate_trace(trace, gates, initial_state=None):
    """Replay a trace and report every protection violation.

    Flags: (a) data-plane key bits changing at a non-gate rip, (b) an
    application-mode read/write of data-plane memory while the key is
    disabled, (c) a key enable not followed by a switch to the data-plane
    stack before any application instruction runs.
    """
    state = initial_state if initial_state is not None else PkruState()
    violations = []
    enable_pending = False  # ckey enabled, dp stack switch not yet seen
    for i, rec in enumerate(trace):
        tag = rec[0]
        if tag == "wrpkru":
            attempt = rec[1]
            before = state.ckey_bits()
            try:
                state = wrpkru(state, attempt, gates)
            except GeneralProtectionFault:
                continue
            after = state.ckey_bits()
            at_gate = attempt.rip in (gates.entry_addr, gates.exit_addr)
            if after != before and not at_gate:
                violations.append(Violation(i, "ckey bits changed at non-gate rip"))
            if after == 0 and before != 0:
                enable_pending = True
        elif tag == "mem":
            _, mode, key, kind = rec
            if mode == APP_MODE and key == CKEY and kind in ("read", "write"):
                violations.append(
                    Violation(i, f"application-mode {kind} of data-plane memory")
                )
        elif tag == "stack_switch":
            if rec[1] == "dp_stack":
                enable_pending = False
        elif tag == "app_insn":
            if enable_pending:
                violations.append(
                    Violation(i, "application instruction ran with ckey enabled before stack switch")
                )
                enable_pending = False
        else:
            raise ValueError(f"malformed trace record at {i}: {rec!r}")
    return violations


# --- attack corpus replay ----------------------------------------------------
#
# Line format: `rip_hex eax_hex ecx_hex edx_hex expected_result`
# expected_result is one of: fault, full, partial.

EXPECTED_RESULTS = ("fault", "full", "partial")


def parse_corpus_line(line):
    parts = line.split()
    if len(parts) != 5:
        raise ValueError(f"corpus line needs 5 fields, got {len(parts)}: {line!r}")
    rip, eax, ecx, edx = (int(p, 16) for p in parts[:4])
    expected = parts[4]
    if expected not in EXPECTED_RESULTS:
        raise ValueError(f"unknown expected result {expected!r}")
    return WrpkruAttempt(rip=rip, eax=eax, ecx=ecx, edx=edx), expected


def replay_attempt(attempt, gates, state):
    """Classify one attempt: returns (outcome, new_state, escaped).

    `escaped` is True iff the data-plane key bits changed through a
    non-gate rip, i.e. the protection was circumvented.
    """
    before = state.ckey_bits()
    try:
        new_state = wrpkru(state, attempt, gates)
    except GeneralProtectionFault:
        return "fault", state, False
    at_gate = attempt.rip in (gates.entry_addr, gates.exit_addr)
    outcome = "full" if at_gate else "partial"
    escaped = new_state.ckey_bits() != before and not at_gate
    return outcome, new_state, escaped


# Gate addresses used by the CLI and the bundled corpus.  Arbitrary but
# fixed: the mechanism only compares rip against them.
DEFAULT_GATES = GateRegisters(entry_addr=0x00401000, exit_addr=0x00401200)


def generate_corpus(seed, n, gates=DEFAULT_GATES, p_gate=0.05, p_bad_regs=0.2):
    """Deterministic random corpus: n lines in the documented format.

    Expected outcomes come straight from the write semantics, so replay
    checks self-consistency; escape detection is the independent check.
    """
    import numpy as np

    rng = np.random.Generator(np.random.Philox(key=[seed, 0xC0]))
    lines = []
    for _ in range(n):
        r = rng.random()
        if r < p_gate / 2:
            rip = gates.entry_addr
        elif r < p_gate:
            rip = gates.exit_addr
        else:
            rip = int(rng.integers(0, 1 << 48))
        eax = int(rng.integers(0, 1 << 32))
        if rng.random() < p_bad_regs:
            ecx = int(rng.integers(0, 1 << 32))
            edx = int(rng.integers(0, 2)) and int(rng.integers(0, 1 << 32))
        else:
            ecx = edx = 0
        attempt = WrpkruAttempt(rip=rip, eax=eax, ecx=ecx, edx=edx)
        outcome, _, _ = replay_attempt(attempt, gates, PkruState(bits=CKEY_MASK))
        lines.append(f"{rip:x} {eax:x} {ecx:x} {edx:x} {outcome}")
    return lines


def replay_corpus(lines, gates, initial_state=None):
    """Replay corpus lines against a fresh protected state each.

    Returns (verdicts, escapes, mismatches) where verdicts is a list of
    (line_no, outcome, expected, ok).
    """
    base = initial_state if initial_state is not None else PkruState(bits=CKEY_MASK)
    verdicts = []
    escapes = 0
    mismatches = 0
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        attempt, expected = parse_corpus_line(line)
        outcome, _, escaped = replay_attempt(attempt, gates, base)
        ok = outcome == expected
        if escaped:
            escapes += 1
        if not ok:
            mismatches += 1
        verdicts.append((n, outcome, expected, ok))
    return verdicts, escapes, mismatches
