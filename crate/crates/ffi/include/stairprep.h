#ifndef STAIRPREP_H
#define STAIRPREP_H

/* Generated from the stairprep-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a C-API call. Mirrors the CLI exit-code classes.
typedef enum {
  // The call succeeded.
  STAIR_STATUS_OK = 0,
  // Invalid arguments, shapes, formats, or I/O problems.
  STAIR_STATUS_USAGE = 2,
  // A numerical abort (non-convergence, degeneracy, vanishing overlap).
  STAIR_STATUS_NUMERICAL = 3,
  // A size guard refused the request.
  STAIR_STATUS_CAPACITY = 4,
} StairStatus;

// Opaque stair-circuit handle (latent gates plus their unitaries).
typedef struct StairGateCircuit StairGateCircuit;

// Opaque many-qubit state handle (a matrix product state).
typedef struct StairState StairState;

// Training hyperparameters. Zero-valued `chi_evolve` / `chi_back` select
// the library defaults; `use_sgd` nonzero switches Adam off.
typedef struct {
  // Initial learning rate.
  double eta0;
  // Learning-rate halvings applied across each stage.
  uint32_t lr_halvings;
  // Epoch budget per growth stage.
  size_t epochs_per_stage;
  // Convergence window in epochs.
  size_t window;
  // Relative loss-change tolerance over the window.
  double rel_tol;
  // Bond cap for the evolved state; 0 selects the default.
  size_t chi_evolve;
  // Bond cap for the adjoint target chain; 0 selects the default.
  size_t chi_back;
  // Broadening of the projection differential.
  double svd_broadening;
  // Perturbation scale for freshly appended layers.
  double epsilon_new_layer;
  // Seed for the first layer; later layers derive from it.
  uint64_t seed;
  // Nonzero selects plain gradient descent instead of Adam.
  int use_sgd;
} StairTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *stair_version(void);

// Message describing the most recent failure on this thread. The pointer
// stays valid until the next failing call on the same thread. Never null.
const char *stair_last_error_message(void);

// Create the computational-basis state |0…0⟩ on `n_sites` qubits.
StairStatus stair_state_zeros(size_t n_sites, StairState **out);

// Create the `n_sites`-qubit GHZ state.
StairStatus stair_state_ghz(size_t n_sites, StairState **out);

// Create a normalized random state with bond dimension at most `chi`,
// deterministic in `seed`.
StairStatus stair_state_random(size_t n_sites, size_t chi, uint64_t seed, StairState **out);

// Compute the ground state of a spin chain by DMRG. `model` is 0 for the
// Heisenberg chain and 1 for the XY chain. The converged energy is
// written to `out_energy` (may be null if not wanted).
StairStatus stair_state_ground(int model,
                               size_t n_sites,
                               size_t chi,
                               size_t max_sweeps,
                               double energy_tol,
                               double *out_energy,
                               StairState **out);

// Load a state from an MPS JSON file.
StairStatus stair_state_load(const char *path, StairState **out);

// Write a state to an MPS JSON file.
StairStatus stair_state_save(const StairState *state, const char *path);

// Release a state handle. Null is a no-op.
void stair_state_free(StairState *state);

// Number of qubits, or 0 for a null handle.
size_t stair_state_n_sites(const StairState *state);

// Largest internal bond dimension, or 0 for a null handle.
size_t stair_state_max_bond(const StairState *state);

// Euclidean norm of the state.
StairStatus stair_state_norm(const StairState *state, double *out_norm);

// Schmidt entropy across internal bond `bond` (1-based, between sites
// `bond−1` and `bond`). The state must be normalized.
StairStatus stair_state_bond_entropy(const StairState *state, size_t bond, double *out_entropy);

// Inner product ⟨bra|ket⟩, written as separate real and imaginary parts
// (either output may be null).
StairStatus stair_overlap(const StairState *bra,
                          const StairState *ket,
                          double *out_re,
                          double *out_im);

// Fill `opts` with the library defaults.
StairStatus stair_train_options_default(StairTrainOptions *opts);

// Grow and train a stair circuit of `n_layers` layers that prepares
// `target` from |0…0⟩. Pass null `opts` for the defaults.
StairStatus stair_circuit_train(const StairState *target,
                                size_t n_layers,
                                const StairTrainOptions *opts,
                                StairGateCircuit **out);

// Load a circuit checkpoint (JSON).
StairStatus stair_circuit_load(const char *path, StairGateCircuit **out);

// Write a circuit checkpoint (JSON).
StairStatus stair_circuit_save(const StairGateCircuit *circuit, const char *path);

// Release a circuit handle. Null is a no-op.
void stair_circuit_free(StairGateCircuit *circuit);

// Number of qubits the circuit acts on, or 0 for a null handle.
size_t stair_circuit_n_sites(const StairGateCircuit *circuit);

// Number of stair layers, or 0 for a null handle.
size_t stair_circuit_n_layers(const StairGateCircuit *circuit);

// Negative logarithmic fidelity per site of the circuit's preparation of
// `target` from |0…0⟩, and the discarded Schmidt weight of the forward
// pass. `chi_evolve` of 0 selects twice the target bond dimension.
// Either output may be null.
StairStatus stair_circuit_loss(const StairGateCircuit *circuit,
                               const StairState *target,
                               size_t chi_evolve,
                               double *out_loss,
                               double *out_truncation);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STAIRPREP_H */
