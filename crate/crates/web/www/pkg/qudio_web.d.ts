/* tslint:disable */
/* eslint-disable */

/**
 * Shows how depolarization pulls the classifier output toward 1/2 and how
 * K-shot sampling scatters it.
 */
export function attenuation(p: number, shots: number, samples: number, seed: bigint): string;

/**
 * Bond distances with a bundled Hamiltonian.
 */
export function bond_distances(): string;

/**
 * Sweeps one classifier parameter over a full period and compares the
 * parameter-shift derivative with a central finite difference.
 */
export function shift_rule(slot: number, points: number, seed: bigint): string;

/**
 * Trains the H₂ ansatz and returns the energy after every round together
 * with the exact ground energy. `shots = 0` with `p = 0` is ideal mode.
 */
export function vqe_trace(distance: number, nodes: number, local_steps: number, rounds: number, lr: number, p: number, shots: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly attenuation: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly bond_distances: () => [number, number];
    readonly shift_rule: (a: number, b: number, c: bigint) => [number, number, number, number];
    readonly vqe_trace: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
