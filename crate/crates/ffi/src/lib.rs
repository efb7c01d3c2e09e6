//! C ABI over the stairprep library: opaque handles for states and
//! circuits, status codes aligned with the CLI exit codes, and a
//! thread-local last-error message. The matching header is generated into
//! `include/stairprep.h` at build time.
//!
//! Conventions:
//! * Constructors hand out owned pointers; release them with the matching
//!   `*_free` function. Passing them to any other library is undefined.
//! * Every fallible call returns a [`StairStatus`]; on failure the
//!   diagnostic is available from [`stair_last_error_message`] until the
//!   next failing call on the same thread.
//! * Null handles are rejected as usage errors, never dereferenced.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use stairprep::circuit::{load_checkpoint, save_checkpoint, StairCircuit as CoreCircuit};
use stairprep::dmrg::dmrg_ground_state;
use stairprep::hamiltonian::{build_mpo, ModelKind, SpinChainModel};
use stairprep::mps::{overlap, MatrixProductState};
use stairprep::optimizer::{
    grow_and_train, negative_log_fidelity, OptimizerKind, TrainConfig,
};
use stairprep::Error;

/// Outcome of a C-API call. Mirrors the CLI exit-code classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StairStatus {
    /// The call succeeded.
    Ok = 0,
    /// Invalid arguments, shapes, formats, or I/O problems.
    Usage = 2,
    /// A numerical abort (non-convergence, degeneracy, vanishing overlap).
    Numerical = 3,
    /// A size guard refused the request.
    Capacity = 4,
}

/// Opaque many-qubit state handle (a matrix product state).
pub struct StairState {
    inner: MatrixProductState,
}

/// Opaque stair-circuit handle (latent gates plus their unitaries).
pub struct StairGateCircuit {
    inner: CoreCircuit,
}

/// Training hyperparameters. Zero-valued `chi_evolve` / `chi_back` select
/// the library defaults; `use_sgd` nonzero switches Adam off.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StairTrainOptions {
    /// Initial learning rate.
    pub eta0: f64,
    /// Learning-rate halvings applied across each stage.
    pub lr_halvings: u32,
    /// Epoch budget per growth stage.
    pub epochs_per_stage: usize,
    /// Convergence window in epochs.
    pub window: usize,
    /// Relative loss-change tolerance over the window.
    pub rel_tol: f64,
    /// Bond cap for the evolved state; 0 selects the default.
    pub chi_evolve: usize,
    /// Bond cap for the adjoint target chain; 0 selects the default.
    pub chi_back: usize,
    /// Broadening of the projection differential.
    pub svd_broadening: f64,
    /// Perturbation scale for freshly appended layers.
    pub epsilon_new_layer: f64,
    /// Seed for the first layer; later layers derive from it.
    pub seed: u64,
    /// Nonzero selects plain gradient descent instead of Adam.
    pub use_sgd: c_int,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(e: &Error) -> StairStatus {
    set_error(&e.to_string());
    match e.exit_code() {
        2 => StairStatus::Usage,
        4 => StairStatus::Capacity,
        _ => StairStatus::Numerical,
    }
}

fn usage(message: &str) -> StairStatus {
    set_error(message);
    StairStatus::Usage
}

/// Run a fallible body, catching panics so they cannot unwind across the
/// C boundary.
fn guarded(body: impl FnOnce() -> StairStatus) -> StairStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            set_error(&format!("internal panic: {msg}"));
            StairStatus::Numerical
        }
    }
}

unsafe fn path_from(ptr: *const c_char, what: &str) -> Result<PathBuf, StairStatus> {
    if ptr.is_null() {
        return Err(usage(&format!("{what} path is null")));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(usage(&format!("{what} path is not valid UTF-8"))),
    }
}

unsafe fn state_ref<'a>(ptr: *const StairState, what: &str) -> Result<&'a StairState, StairStatus> {
    if ptr.is_null() {
        return Err(usage(&format!("{what} handle is null")));
    }
    Ok(&*ptr)
}

unsafe fn circuit_ref<'a>(
    ptr: *const StairGateCircuit,
    what: &str,
) -> Result<&'a StairGateCircuit, StairStatus> {
    if ptr.is_null() {
        return Err(usage(&format!("{what} handle is null")));
    }
    Ok(&*ptr)
}

unsafe fn give_state(
    out: *mut *mut StairState,
    state: MatrixProductState,
) -> StairStatus {
    if out.is_null() {
        return usage("output handle location is null");
    }
    *out = Box::into_raw(Box::new(StairState { inner: state }));
    StairStatus::Ok
}

unsafe fn give_circuit(
    out: *mut *mut StairGateCircuit,
    circuit: CoreCircuit,
) -> StairStatus {
    if out.is_null() {
        return usage("output handle location is null");
    }
    *out = Box::into_raw(Box::new(StairGateCircuit { inner: circuit }));
    StairStatus::Ok
}

unsafe fn write_f64(out: *mut f64, value: f64, what: &str) -> StairStatus {
    if out.is_null() {
        return usage(&format!("{what} output pointer is null"));
    }
    *out = value;
    StairStatus::Ok
}

// ---------------------------------------------------------------------------
// diagnostics

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn stair_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn stair_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

// ---------------------------------------------------------------------------
// states

/// Create the computational-basis state |0…0⟩ on `n_sites` qubits.
#[no_mangle]
pub unsafe extern "C" fn stair_state_zeros(
    n_sites: usize,
    out: *mut *mut StairState,
) -> StairStatus {
    guarded(|| match MatrixProductState::all_zeros(n_sites) {
        Ok(state) => give_state(out, state),
        Err(e) => fail(&e),
    })
}

/// Create the `n_sites`-qubit GHZ state.
#[no_mangle]
pub unsafe extern "C" fn stair_state_ghz(
    n_sites: usize,
    out: *mut *mut StairState,
) -> StairStatus {
    guarded(|| match MatrixProductState::ghz_state(n_sites) {
        Ok(state) => give_state(out, state),
        Err(e) => fail(&e),
    })
}

/// Create a normalized random state with bond dimension at most `chi`,
/// deterministic in `seed`.
#[no_mangle]
pub unsafe extern "C" fn stair_state_random(
    n_sites: usize,
    chi: usize,
    seed: u64,
    out: *mut *mut StairState,
) -> StairStatus {
    guarded(|| {
        let built = MatrixProductState::random_mps(n_sites, chi, seed)
            .and_then(|s| s.normalized());
        match built {
            Ok(state) => give_state(out, state),
            Err(e) => fail(&e),
        }
    })
}

/// Compute the ground state of a spin chain by DMRG. `model` is 0 for the
/// Heisenberg chain and 1 for the XY chain. The converged energy is
/// written to `out_energy` (may be null if not wanted).
#[no_mangle]
pub unsafe extern "C" fn stair_state_ground(
    model: c_int,
    n_sites: usize,
    chi: usize,
    max_sweeps: usize,
    energy_tol: f64,
    out_energy: *mut f64,
    out: *mut *mut StairState,
) -> StairStatus {
    guarded(|| {
        let kind = match model {
            0 => ModelKind::Heisenberg,
            1 => ModelKind::Xy,
            other => return usage(&format!("unknown model id {other} (0 or 1)")),
        };
        let run = SpinChainModel::new(kind, n_sites).and_then(|m| {
            let mpo = build_mpo(&m);
            dmrg_ground_state(&mpo, chi, max_sweeps, energy_tol)
        });
        match run {
            Ok(done) => {
                let normalized = match done.psi.normalized() {
                    Ok(s) => s,
                    Err(e) => return fail(&e),
                };
                if !out_energy.is_null() {
                    *out_energy = done.energy;
                }
                give_state(out, normalized)
            }
            Err(e) => fail(&e),
        }
    })
}

/// Load a state from an MPS JSON file.
#[no_mangle]
pub unsafe extern "C" fn stair_state_load(
    path: *const c_char,
    out: *mut *mut StairState,
) -> StairStatus {
    guarded(|| {
        let path = match path_from(path, "state") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match stairprep::io::load_mps(&path) {
            Ok(state) => give_state(out, state),
            Err(e) => fail(&e),
        }
    })
}

/// Write a state to an MPS JSON file.
#[no_mangle]
pub unsafe extern "C" fn stair_state_save(
    state: *const StairState,
    path: *const c_char,
) -> StairStatus {
    guarded(|| {
        let state = match state_ref(state, "state") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let path = match path_from(path, "state") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match stairprep::io::save_mps(&state.inner, &path) {
            Ok(()) => StairStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Release a state handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn stair_state_free(state: *mut StairState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Number of qubits, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn stair_state_n_sites(state: *const StairState) -> usize {
    if state.is_null() {
        return 0;
    }
    (*state).inner.n_sites()
}

/// Largest internal bond dimension, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn stair_state_max_bond(state: *const StairState) -> usize {
    if state.is_null() {
        return 0;
    }
    (*state).inner.max_internal_bond()
}

/// Euclidean norm of the state.
#[no_mangle]
pub unsafe extern "C" fn stair_state_norm(
    state: *const StairState,
    out_norm: *mut f64,
) -> StairStatus {
    guarded(|| {
        let state = match state_ref(state, "state") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match state.inner.norm() {
            Ok(n) => write_f64(out_norm, n, "norm"),
            Err(e) => fail(&e),
        }
    })
}

/// Schmidt entropy across internal bond `bond` (1-based, between sites
/// `bond−1` and `bond`). The state must be normalized.
#[no_mangle]
pub unsafe extern "C" fn stair_state_bond_entropy(
    state: *const StairState,
    bond: usize,
    out_entropy: *mut f64,
) -> StairStatus {
    guarded(|| {
        let state = match state_ref(state, "state") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match state.inner.bond_entropy(bond) {
            Ok(s) => write_f64(out_entropy, s, "entropy"),
            Err(e) => fail(&e),
        }
    })
}

/// Inner product ⟨bra|ket⟩, written as separate real and imaginary parts
/// (either output may be null).
#[no_mangle]
pub unsafe extern "C" fn stair_overlap(
    bra: *const StairState,
    ket: *const StairState,
    out_re: *mut f64,
    out_im: *mut f64,
) -> StairStatus {
    guarded(|| {
        let bra = match state_ref(bra, "bra") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let ket = match state_ref(ket, "ket") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match overlap(&bra.inner, &ket.inner) {
            Ok(z) => {
                if !out_re.is_null() {
                    *out_re = z.re;
                }
                if !out_im.is_null() {
                    *out_im = z.im;
                }
                StairStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

// ---------------------------------------------------------------------------
// circuits

/// Fill `opts` with the library defaults.
#[no_mangle]
pub unsafe extern "C" fn stair_train_options_default(opts: *mut StairTrainOptions) -> StairStatus {
    if opts.is_null() {
        return usage("options pointer is null");
    }
    let d = TrainConfig::default();
    *opts = StairTrainOptions {
        eta0: d.eta0,
        lr_halvings: d.lr_halvings,
        epochs_per_stage: d.epochs_per_stage,
        window: d.window,
        rel_tol: d.rel_tol,
        chi_evolve: 0,
        chi_back: 0,
        svd_broadening: d.svd_broadening,
        epsilon_new_layer: d.epsilon_new_layer,
        seed: d.seed,
        use_sgd: 0,
    };
    StairStatus::Ok
}

fn config_from(opts: &StairTrainOptions) -> TrainConfig {
    TrainConfig {
        eta0: opts.eta0,
        lr_halvings: opts.lr_halvings,
        epochs_per_stage: opts.epochs_per_stage,
        window: opts.window,
        rel_tol: opts.rel_tol,
        chi_evolve: (opts.chi_evolve > 0).then_some(opts.chi_evolve),
        chi_back: (opts.chi_back > 0).then_some(opts.chi_back),
        svd_broadening: opts.svd_broadening,
        epsilon_new_layer: opts.epsilon_new_layer,
        seed: opts.seed,
        optimizer: if opts.use_sgd != 0 {
            OptimizerKind::Sgd
        } else {
            OptimizerKind::Adam
        },
    }
}

/// Grow and train a stair circuit of `n_layers` layers that prepares
/// `target` from |0…0⟩. Pass null `opts` for the defaults.
#[no_mangle]
pub unsafe extern "C" fn stair_circuit_train(
    target: *const StairState,
    n_layers: usize,
    opts: *const StairTrainOptions,
    out: *mut *mut StairGateCircuit,
) -> StairStatus {
    guarded(|| {
        let target = match state_ref(target, "target") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let config = if opts.is_null() {
            TrainConfig::default()
        } else {
            config_from(&*opts)
        };
        let run = MatrixProductState::all_zeros(target.inner.n_sites()).and_then(|psi0| {
            grow_and_train(&target.inner, &psi0, n_layers, &config)
        });
        match run {
            Ok((circuit, _records)) => give_circuit(out, circuit),
            Err(e) => fail(&e),
        }
    })
}

/// Load a circuit checkpoint (JSON).
#[no_mangle]
pub unsafe extern "C" fn stair_circuit_load(
    path: *const c_char,
    out: *mut *mut StairGateCircuit,
) -> StairStatus {
    guarded(|| {
        let path = match path_from(path, "checkpoint") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match load_checkpoint(&path) {
            Ok(circuit) => give_circuit(out, circuit),
            Err(e) => fail(&e),
        }
    })
}

/// Write a circuit checkpoint (JSON).
#[no_mangle]
pub unsafe extern "C" fn stair_circuit_save(
    circuit: *const StairGateCircuit,
    path: *const c_char,
) -> StairStatus {
    guarded(|| {
        let circuit = match circuit_ref(circuit, "circuit") {
            Ok(c) => c,
            Err(status) => return status,
        };
        let path = match path_from(path, "checkpoint") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match save_checkpoint(&circuit.inner, &path) {
            Ok(()) => StairStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Release a circuit handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn stair_circuit_free(circuit: *mut StairGateCircuit) {
    if !circuit.is_null() {
        drop(Box::from_raw(circuit));
    }
}

/// Number of qubits the circuit acts on, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn stair_circuit_n_sites(circuit: *const StairGateCircuit) -> usize {
    if circuit.is_null() {
        return 0;
    }
    (*circuit).inner.n_sites()
}

/// Number of stair layers, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn stair_circuit_n_layers(circuit: *const StairGateCircuit) -> usize {
    if circuit.is_null() {
        return 0;
    }
    (*circuit).inner.n_layers()
}

/// Negative logarithmic fidelity per site of the circuit's preparation of
/// `target` from |0…0⟩, and the discarded Schmidt weight of the forward
/// pass. `chi_evolve` of 0 selects twice the target bond dimension.
/// Either output may be null.
#[no_mangle]
pub unsafe extern "C" fn stair_circuit_loss(
    circuit: *const StairGateCircuit,
    target: *const StairState,
    chi_evolve: usize,
    out_loss: *mut f64,
    out_truncation: *mut f64,
) -> StairStatus {
    guarded(|| {
        let circuit = match circuit_ref(circuit, "circuit") {
            Ok(c) => c,
            Err(status) => return status,
        };
        let target = match state_ref(target, "target") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let chi = if chi_evolve == 0 {
            (2 * target.inner.max_internal_bond()).max(4)
        } else {
            chi_evolve
        };
        let run = MatrixProductState::all_zeros(target.inner.n_sites()).and_then(|psi0| {
            negative_log_fidelity(&target.inner, &circuit.inner, &psi0, chi)
        });
        match run {
            Ok((loss, _overlap, truncation)) => {
                if !out_loss.is_null() {
                    *out_loss = loss;
                }
                if !out_truncation.is_null() {
                    *out_truncation = truncation;
                }
                StairStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
