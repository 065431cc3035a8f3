"""Private set-union cardinality: group arithmetic, round protocol, wire format."""

from privmeter.psc.group import (
    GROUP_DESK,
    GROUP_TINY,
    P_DESK,
    P_TINY,
    Cipher,
    Group,
    KeyMaterial,
    KeyShare,
)
from privmeter.psc.protocol import (
    B_DEFAULT,
    BinVector,
    Matrix,
    NoiseBinParams,
    PSCRoundResult,
    cp_add_noise,
    cp_shuffle_rerandomize,
    dc_observe_item,
    encode_item,
    hash_to_bin,
    joint_decrypt_count,
    noise_bins_required,
    run_psc_round,
)
from privmeter.psc.estimate import estimate_from_round, psc_estimate
from privmeter.psc.wire import (
    Transcript,
    pack_matrix,
    read_frames,
    unpack_matrix,
    write_frames,
)

__all__ = [
    "GROUP_DESK", "GROUP_TINY", "P_DESK", "P_TINY", "Cipher", "Group",
    "KeyMaterial", "KeyShare", "B_DEFAULT", "BinVector", "Matrix",
    "NoiseBinParams", "PSCRoundResult", "cp_add_noise",
    "cp_shuffle_rerandomize", "dc_observe_item", "encode_item", "hash_to_bin",
    "joint_decrypt_count", "noise_bins_required", "run_psc_round",
    "psc_estimate", "estimate_from_round",
    "Transcript", "pack_matrix", "read_frames", "unpack_matrix",
    "write_frames",
]
