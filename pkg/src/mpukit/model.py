"""ARMv7-M / ARMv8-M MPU region semantics.

Everything here is a pure function over immutable values: region
validation, access resolution (overlap precedence, sub-region disabling,
the privileged background map), bit-exact BAR/BASR encoding, and
effective-permission enumeration.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import (
    InexpressiblePermissionsError,
    InvalidConfigError,
    MalformedEncodingError,
)

ADDRESS_SPACE = 1 << 32
MIN_REGION_SIZE = 32
MIN_SIZE_EXPONENT = 4          # size = 2 ** (exponent + 1)
MAX_SIZE_EXPONENT = 31
SRD_CAPABLE_SIZE = 256         # regions this large split into 8 sub-regions
SUBREGION_COUNT = 8


class Arch(enum.Enum):
    V7 = "v7"
    V8 = "v8"


class Mode(enum.Enum):
    PRIVILEGED = "privileged"
    UNPRIVILEGED = "unprivileged"


class Right(enum.Enum):
    READ = "r"
    WRITE = "w"
    EXECUTE = "x"


class AccessKind(enum.Enum):
    READ = "read"
    WRITE = "write"
    EXECUTE = "execute"


class Verdict(enum.Enum):
    ALLOW = "allow"
    FAULT = "fault"


class FaultReason(enum.Enum):
    NO_MATCHING_REGION = "no-matching-region"
    PERMISSION_DENIED = "permission-denied"
    MPU_DISABLED_POLICY = "mpu-disabled-policy"


_RIGHT_ORDER = (Right.READ, Right.WRITE, Right.EXECUTE)


def rights(text: str) -> frozenset[Right]:
    """Parse "rw", "rx", "rw-" (dashes ignored) into a rights set."""
    out = set()
    for ch in text:
        if ch == "-":
            continue
        out.add(Right(ch))
    return frozenset(out)


def rights_str(rs: frozenset[Right]) -> str:
    """Render a rights set as a fixed-width mask, e.g. "rw-"."""
    return "".join(r.value if r in rs else "-" for r in _RIGHT_ORDER)


@dataclass(frozen=True)
class PermissionSet:
    """Per-mode read/write/execute rights."""

    privileged: frozenset[Right] = frozenset()
    unprivileged: frozenset[Right] = frozenset()

    @classmethod
    def of(cls, privileged: str, unprivileged: str) -> "PermissionSet":
        return cls(rights(privileged), rights(unprivileged))

    def rights_for(self, mode: Mode) -> frozenset[Right]:
        return self.privileged if mode is Mode.PRIVILEGED else self.unprivileged

    def __str__(self) -> str:
        return f"{rights_str(self.privileged)}/{rights_str(self.unprivileged)}"


NO_ACCESS = PermissionSet()


@dataclass(frozen=True)
class RegionAttributes:
    """Opaque ordering/caching attribute bits (6-bit field, never interpreted)."""

    raw_attribute_bits: int = 0

    def __post_init__(self):
        if not 0 <= self.raw_attribute_bits <= 0x3F:
            raise ValueError("attribute bits must fit the 6-bit field")


@dataclass(frozen=True)
class AddressRange:
    """Byte range [base, base + size) in the 32-bit address space."""

    base: int
    size: int

    def __post_init__(self):
        if self.base < 0 or self.size <= 0:
            raise ValueError("range needs base >= 0 and size > 0")
        if self.base + self.size > ADDRESS_SPACE:
            raise ValueError("range wraps past the 32-bit address space")

    @property
    def end(self) -> int:
        """First address past the range."""
        return self.base + self.size

    @property
    def last(self) -> int:
        """Highest address inside the range."""
        return self.base + self.size - 1

    def contains(self, address: int) -> bool:
        return self.base <= address < self.end

    def overlaps(self, other: "AddressRange") -> bool:
        return self.base < other.end and other.base < self.end

    def __str__(self) -> str:
        return f"0x{self.base:08x}..0x{self.last:08x}"


def _check_address(name: str, value: int) -> None:
    if not 0 <= value < ADDRESS_SPACE:
        raise ValueError(f"{name} must lie in the 32-bit address space")


@dataclass(frozen=True)
class V7Region:
    """One ARMv7-M region: power-of-two sized, base-aligned, with an 8-bit
    sub-region disable mask (bit i set = sub-region i disabled, bit 0 =
    lowest-addressed sub-region)."""

    number: int
    base: int
    size_exponent: int
    srd_mask: int = 0
    perms: PermissionSet = NO_ACCESS
    attrs: RegionAttributes = field(default_factory=RegionAttributes)
    enabled: bool = True

    def __post_init__(self):
        if self.number < 0:
            raise ValueError("region number must be non-negative")
        _check_address("region base", self.base)
        if not 0 <= self.size_exponent <= MAX_SIZE_EXPONENT:
            raise ValueError("size exponent must fit the 5-bit SIZE field")
        if not 0 <= self.srd_mask <= 0xFF:
            raise ValueError("sub-region disable mask is an 8-bit field")

    @property
    def size(self) -> int:
        return 1 << (self.size_exponent + 1)

    @property
    def subregion_size(self) -> int:
        return self.size // SUBREGION_COUNT

    def span(self) -> AddressRange:
        return AddressRange(self.base, min(self.size, ADDRESS_SPACE - self.base))

    def matches(self, address: int) -> bool:
        """True when the address falls in an enabled sub-region."""
        if not self.enabled:
            return False
        offset = address - self.base
        if offset < 0 or offset >= self.size:
            return False
        if self.size < SRD_CAPABLE_SIZE:
            return True
        index = offset * SUBREGION_COUNT // self.size
        return not self.srd_mask >> index & 1


@dataclass(frozen=True)
class V8Region:
    """One ARMv8-M region: an inclusive [start, limit] pair at 32-byte
    granularity, no sub-regions, no overlap with other enabled regions."""

    number: int
    start: int
    limit: int
    perms: PermissionSet = NO_ACCESS
    attrs: RegionAttributes = field(default_factory=RegionAttributes)
    enabled: bool = True

    def __post_init__(self):
        if self.number < 0:
            raise ValueError("region number must be non-negative")
        _check_address("region start", self.start)
        _check_address("region limit", self.limit)

    @property
    def size(self) -> int:
        return self.limit - self.start + 1

    def span(self) -> AddressRange:
        return AddressRange(self.start, self.size)

    def matches(self, address: int) -> bool:
        return self.enabled and self.start <= address <= self.limit


Region = V7Region | V8Region


@dataclass(frozen=True)
class MpuConfig:
    """An architecture-tagged set of regions plus the global enable flags."""

    arch: Arch
    max_regions: int
    regions: tuple[Region, ...]
    mpu_enabled: bool = True
    background_enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))


class ViolationCode(enum.Enum):
    BAD_MAX_REGIONS = "bad-max-regions"
    TOO_MANY_REGIONS = "too-many-regions"
    ARCH_REGION_MISMATCH = "arch-region-mismatch"
    NUMBER_RANGE = "number-range"
    DUPLICATE_NUMBER = "duplicate-number"
    MIN_SIZE = "min-size"
    MISALIGNED = "misaligned"
    SRD_ON_SMALL_REGION = "srd-on-small-region"
    SRD_ALL_DISABLED = "srd-all-disabled"
    V8_EMPTY = "v8-empty"
    V8_MISALIGNED = "v8-misaligned"
    V8_OVERLAP = "v8-overlap"


_CODE_ORDER = {code: i for i, code in enumerate(ViolationCode)}


@dataclass(frozen=True)
class Violation:
    """One validation failure; region is None for config-level problems."""

    region: int | None
    code: ViolationCode
    message: str


def _v7_violations(region: V7Region) -> list[Violation]:
    out = []
    n = region.number
    if region.size_exponent < MIN_SIZE_EXPONENT:
        out.append(Violation(n, ViolationCode.MIN_SIZE,
                             f"region {n}: size {region.size} is below the "
                             f"{MIN_REGION_SIZE}-byte minimum"))
    if region.base % region.size != 0:
        out.append(Violation(n, ViolationCode.MISALIGNED,
                             f"region {n}: base 0x{region.base:08x} is not a "
                             f"multiple of its size 0x{region.size:x}"))
    if region.srd_mask and region.size < SRD_CAPABLE_SIZE:
        out.append(Violation(n, ViolationCode.SRD_ON_SMALL_REGION,
                             f"region {n}: sub-region disables require a size "
                             f"of at least {SRD_CAPABLE_SIZE} bytes"))
    if region.srd_mask == 0xFF and region.enabled:
        out.append(Violation(n, ViolationCode.SRD_ALL_DISABLED,
                             f"region {n}: all sub-regions disabled; use "
                             "enabled=False instead"))
    return out


def _v8_violations(region: V8Region) -> list[Violation]:
    out = []
    n = region.number
    if region.start > region.limit:
        out.append(Violation(n, ViolationCode.V8_EMPTY,
                             f"region {n}: start 0x{region.start:08x} lies "
                             f"past limit 0x{region.limit:08x}"))
    elif region.start % 32 or (region.limit + 1) % 32:
        out.append(Violation(n, ViolationCode.V8_MISALIGNED,
                             f"region {n}: start and limit+1 must be "
                             "multiples of 32 bytes"))
    return out


def validate_config(config: MpuConfig) -> list[Violation]:
    """Collect every invariant violation in the configuration.

    Violations are data, not failures: an empty list means the config is
    well-formed.  Ordering is deterministic: config-level problems first,
    then by region number, then by violation code.
    """
    out: list[Violation] = []
    allowed_counts = {Arch.V7: (8, 16), Arch.V8: (16,)}[config.arch]
    if config.max_regions not in allowed_counts:
        out.append(Violation(None, ViolationCode.BAD_MAX_REGIONS,
                             f"{config.arch.value} supports "
                             f"{' or '.join(map(str, allowed_counts))} regions, "
                             f"not {config.max_regions}"))
    if len(config.regions) > config.max_regions:
        out.append(Violation(None, ViolationCode.TOO_MANY_REGIONS,
                             f"{len(config.regions)} regions exceed the "
                             f"{config.max_regions}-region budget"))

    expected = V7Region if config.arch is Arch.V7 else V8Region
    seen: set[int] = set()
    for region in config.regions:
        n = region.number
        if not isinstance(region, expected):
            out.append(Violation(n, ViolationCode.ARCH_REGION_MISMATCH,
                                 f"region {n}: {type(region).__name__} does "
                                 f"not belong to a {config.arch.value} config"))
            continue
        if n >= config.max_regions:
            out.append(Violation(n, ViolationCode.NUMBER_RANGE,
                                 f"region number {n} exceeds "
                                 f"{config.max_regions - 1}"))
        if n in seen:
            out.append(Violation(n, ViolationCode.DUPLICATE_NUMBER,
                                 f"region number {n} used more than once"))
        seen.add(n)
        if isinstance(region, V7Region):
            out.extend(_v7_violations(region))
        else:
            out.extend(_v8_violations(region))

    if config.arch is Arch.V8:
        v8 = [r for r in config.regions
              if isinstance(r, V8Region) and r.enabled and r.start <= r.limit]
        v8.sort(key=lambda r: (r.start, r.number))
        for a, b in zip(v8, v8[1:]):
            if b.start <= a.limit:
                out.append(Violation(max(a.number, b.number),
                                     ViolationCode.V8_OVERLAP,
                                     f"regions {a.number} and {b.number} "
                                     "overlap; v8 forbids overlapping "
                                     "enabled regions"))

    out.sort(key=lambda v: (-1 if v.region is None else v.region,
                            _CODE_ORDER[v.code]))
    return out


@dataclass(frozen=True)
class AccessQuery:
    address: int
    mode: Mode
    kind: AccessKind


@dataclass(frozen=True)
class AccessDecision:
    verdict: Verdict
    fault_reason: FaultReason | None = None
    matched_region: int | None = None

    @property
    def allowed(self) -> bool:
        return self.verdict is Verdict.ALLOW


_ALLOW_BACKGROUND = AccessDecision(Verdict.ALLOW)
_FAULT_NO_MATCH = AccessDecision(Verdict.FAULT, FaultReason.NO_MATCHING_REGION)


def _grants(perms: PermissionSet, mode: Mode, kind: AccessKind) -> bool:
    rs = perms.privileged if mode is Mode.PRIVILEGED else perms.unprivileged
    if kind is AccessKind.READ:
        return Right.READ in rs
    if kind is AccessKind.WRITE:
        return Right.WRITE in rs
    # Instruction fetch needs a readable match with XN clear.
    return Right.READ in rs and Right.EXECUTE in rs


def _ensure_valid(config: MpuConfig) -> None:
    if getattr(config, "_validated", False):
        return
    violations = validate_config(config)
    if violations:
        raise InvalidConfigError(violations)
    object.__setattr__(config, "_validated", True)


def _match_order(config: MpuConfig) -> tuple[Region, ...]:
    order = getattr(config, "_match_order", None)
    if order is None:
        order = tuple(sorted((r for r in config.regions if r.enabled),
                             key=lambda r: -r.number))
        object.__setattr__(config, "_match_order", order)
    return order


def resolve_access(config: MpuConfig, query: AccessQuery) -> AccessDecision:
    """Decide one memory access against a well-formed configuration.

    The highest-numbered enabled region whose covering sub-region is
    enabled decides via its permission set.  A disabled sub-region makes
    the address fall through to lower-numbered regions and finally to the
    background map, which grants privileged access only.  With the MPU
    turned off every access is allowed.

    Raises InvalidConfigError (a contract breach, distinct from a Fault
    verdict) when the configuration fails validation.
    """
    _ensure_valid(config)
    _check_address("query address", query.address)
    if not config.mpu_enabled:
        return _ALLOW_BACKGROUND
    address = query.address
    for region in _match_order(config):
        if region.matches(address):
            if _grants(region.perms, query.mode, query.kind):
                return AccessDecision(Verdict.ALLOW,
                                      matched_region=region.number)
            return AccessDecision(Verdict.FAULT,
                                  FaultReason.PERMISSION_DENIED,
                                  matched_region=region.number)
    if config.background_enabled and query.mode is Mode.PRIVILEGED:
        return _ALLOW_BACKGROUND
    return _FAULT_NO_MATCH


def effective_rights(config: MpuConfig, address: int,
                     mode: Mode) -> frozenset[Right]:
    """Rights actually granted at an address: the decision-level view."""
    kinds = ((AccessKind.READ, Right.READ), (AccessKind.WRITE, Right.WRITE),
             (AccessKind.EXECUTE, Right.EXECUTE))
    return frozenset(right for kind, right in kinds
                     if resolve_access(config,
                                       AccessQuery(address, mode, kind)).allowed)


@dataclass(frozen=True)
class EffectiveRange:
    """One run of addresses with identical access decisions for a mode."""

    range: AddressRange
    mode: Mode
    rights: frozenset[Right]


def _decision_edges(config: MpuConfig, universe: AddressRange) -> list[int]:
    """Addresses inside the universe where a region or sub-region starts
    or ends; decisions are constant between consecutive edges."""
    edges = {universe.base, universe.end}
    for region in config.regions:
        if not region.enabled:
            continue
        if isinstance(region, V7Region):
            if region.size >= SRD_CAPABLE_SIZE:
                step = region.subregion_size
                bounds = [region.base + k * step
                          for k in range(SUBREGION_COUNT + 1)]
            else:
                bounds = [region.base, region.base + region.size]
        else:
            bounds = [region.start, region.limit + 1]
        for b in bounds:
            if universe.base < b < universe.end:
                edges.add(b)
    return sorted(edges)


def enumerate_effective_permissions(
        config: MpuConfig, universe: AddressRange,
        granularity: int = MIN_REGION_SIZE) -> list[EffectiveRange]:
    """Partition the universe into maximal runs whose six (mode, kind)
    decisions are identical, reporting the granted rights per mode.

    The partition is computed from region boundaries, so it is exact for
    every address regardless of granularity; the granularity argument is
    validated as the caller's sampling contract.
    """
    _ensure_valid(config)
    if granularity < MIN_REGION_SIZE:
        raise ValueError(f"granularity must be at least {MIN_REGION_SIZE}")
    if universe.size % granularity:
        raise ValueError("granularity must divide the universe size")

    edges = _decision_edges(config, universe)
    runs: list[tuple[int, int, dict[Mode, frozenset[Right]]]] = []
    for start, end in zip(edges, edges[1:]):
        vector = {mode: effective_rights(config, start, mode) for mode in Mode}
        if runs and runs[-1][2] == vector and runs[-1][1] == start:
            runs[-1] = (runs[-1][0], end, vector)
        else:
            runs.append((start, end, vector))

    out = []
    for start, end, vector in runs:
        for mode in Mode:
            out.append(EffectiveRange(AddressRange(start, end - start),
                                      mode, vector[mode]))
    return out


# --- BAR / BASR register codec -------------------------------------------
#
# BAR  = ADDR[31:5] | VALID(bit 4) | REGION[3:0]
# BASR = XN(28) | AP[26:24] | attrs[21:16] | SRD[15:8] | SIZE[5:1] | ENABLE(0)

_BAR_VALID = 1 << 4
_BASR_RESERVED = ~((1 << 28) | (0b111 << 24) | (0x3F << 16) | (0xFF << 8)
                   | (0b11111 << 1) | 1) & 0xFFFFFFFF

# AP field value -> (privileged r/w, unprivileged r/w)
_AP_DECODE = {
    0b000: (frozenset(), frozenset()),
    0b001: (rights("rw"), frozenset()),
    0b010: (rights("rw"), rights("r")),
    0b011: (rights("rw"), rights("rw")),
    0b101: (rights("r"), frozenset()),
    0b110: (rights("r"), rights("r")),
    0b111: (rights("r"), rights("r")),
}
_AP_ENCODE = {
    (frozenset(), frozenset()): 0b000,
    (rights("rw"), frozenset()): 0b001,
    (rights("rw"), rights("r")): 0b010,
    (rights("rw"), rights("rw")): 0b011,
    (rights("r"), frozenset()): 0b101,
    (rights("r"), rights("r")): 0b110,
}


def _apply_xn(priv_rw: frozenset[Right], unpriv_rw: frozenset[Right],
              xn: int) -> PermissionSet:
    """Execute is granted exactly where the mode can read and XN is clear."""
    def mode_rights(rw):
        if not xn and Right.READ in rw:
            return rw | {Right.EXECUTE}
        return rw
    return PermissionSet(frozenset(mode_rights(priv_rw)),
                         frozenset(mode_rights(unpriv_rw)))


def encode_v7(region: V7Region) -> tuple[int, int]:
    """Encode a region into its (BAR, BASR) register words.

    Raises InexpressiblePermissionsError when the permission set has no
    AP/XN encoding, and ValueError when the region breaks a structural
    invariant (callers are expected to validate first).
    """
    problems = _v7_violations(region)
    if problems:
        raise ValueError(problems[0].message)
    if region.number > 0xF:
        raise ValueError("BAR holds a 4-bit region number")

    priv_rw = region.perms.privileged - {Right.EXECUTE}
    unpriv_rw = region.perms.unprivileged - {Right.EXECUTE}
    ap = _AP_ENCODE.get((priv_rw, unpriv_rw))
    if ap is None:
        raise InexpressiblePermissionsError(
            f"no AP encoding for {region.perms}")
    for xn in (1, 0):
        if _apply_xn(priv_rw, unpriv_rw, xn) == region.perms:
            break
    else:
        raise InexpressiblePermissionsError(
            f"execute rights in {region.perms} do not follow the XN rule")

    bar = region.base & 0xFFFFFFE0 | _BAR_VALID | region.number
    basr = (xn << 28 | ap << 24 | region.attrs.raw_attribute_bits << 16
            | region.srd_mask << 8 | region.size_exponent << 1
            | int(region.enabled))
    return bar, basr


def decode_v7(bar_word: int, basr_word: int) -> V7Region:
    """Exact inverse of encode_v7 on its image.

    Raises MalformedEncodingError for reserved AP values, sizes below the
    32-byte minimum, nonzero reserved bits, or a clear VALID bit.
    """
    for name, word in (("BAR", bar_word), ("BASR", basr_word)):
        if not 0 <= word < ADDRESS_SPACE:
            raise MalformedEncodingError(f"{name} is not a 32-bit word")
    if not bar_word & _BAR_VALID:
        raise MalformedEncodingError("BAR VALID bit is clear")
    if basr_word & _BASR_RESERVED:
        raise MalformedEncodingError("reserved BASR bits are set")

    size_exponent = basr_word >> 1 & 0b11111
    if size_exponent < MIN_SIZE_EXPONENT:
        raise MalformedEncodingError(
            f"SIZE field {size_exponent} encodes less than "
            f"{MIN_REGION_SIZE} bytes")
    ap = basr_word >> 24 & 0b111
    if ap not in _AP_DECODE:
        raise MalformedEncodingError(f"AP value 0b{ap:03b} is reserved")

    priv_rw, unpriv_rw = _AP_DECODE[ap]
    return V7Region(
        number=bar_word & 0xF,
        base=bar_word & 0xFFFFFFE0,
        size_exponent=size_exponent,
        srd_mask=basr_word >> 8 & 0xFF,
        perms=_apply_xn(priv_rw, unpriv_rw, basr_word >> 28 & 1),
        attrs=RegionAttributes(basr_word >> 16 & 0x3F),
        enabled=bool(basr_word & 1),
    )
