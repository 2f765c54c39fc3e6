"""Simulation laboratory for L2-orthogonal space-time block-coded CPM."""

from .cpm import (Alphabet, CpmParams, PhaseTrack, Waveform, accumulate_phase,
                  bit_distance_table, bit_label_table, gray_bits, gray_map,
                  q_rec, q_rec_exact, synthesize, update_theta)
from .codes import (CodeScheme, DataBlock, EncodedBlock, EncoderState,
                    SourceSymbols, conventional, correction_parallel,
                    correction_wang_xia, encode_block, encode_stream,
                    initial_state, l2_residual, l2_residual_sampled,
                    map_block, max_boundary_jump, parallel_l2,
                    recover_block_symbols, repetition, scheme_by_name,
                    slot_phase_line, wang_xia, xi_from_continuity,
                    xi_half_cycle_condition, xi_increment)
from .channel import ChannelRealization, NoiseParams, draw_channel, transmit
from .receiver import (Decoder, ReceiverContext, candidate_frames,
                       exhaustive_ml, phase_state_closure, slot_branch_metrics)

__version__ = "0.1.0"
