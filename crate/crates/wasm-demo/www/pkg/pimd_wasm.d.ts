/* tslint:disable */
/* eslint-disable */

/**
 * One trajectory and a running virial kinetic-energy average.
 */
export class Sampler {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Advances `steps` timesteps, sampling the weight after each.
     */
    advance(steps: number): void;
    /**
     * Running mean of the virial kinetic energy, NaN before the first step.
     */
    kinetic_energy(): number;
    /**
     * `method` is one of `pmmLang`, `pmmLang+RBM`, `pmmLang+split`,
     * `pmmLang+RBM+split`; split methods need `potential = "mixed"`.
     */
    constructor(potential_kind: string, method: string, n_particles: number, n_beads: number, batch_size: number, dt: number, seed: bigint);
    pair_evals_per_step(): number;
    /**
     * Bead positions as `[x, y]` pairs, bead-major then particle:
     * `(k, i) ↦ 2 (k P + i)`.
     */
    positions_xy(): Float64Array;
    /**
     * NaN for methods without a Metropolis test.
     */
    rejection_rate(): number;
    time(): number;
}

/**
 * `n` samples of the radial pair potential on `[r_min, r_max]`.
 */
export function potential_curve(kind: string, r_min: number, r_max: number, n: number): Float64Array;

/**
 * Sorted eigenvalues of `L + αI` for a ring of `n_beads` with unit mass,
 * followed by the condition number of `L` over its nonzero modes.
 */
export function ring_spectrum(n_beads: number, beta: number, alpha: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_sampler_free: (a: number, b: number) => void;
    readonly potential_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly ring_spectrum: (a: number, b: number, c: number) => [number, number, number, number];
    readonly sampler_advance: (a: number, b: number) => [number, number];
    readonly sampler_kinetic_energy: (a: number) => number;
    readonly sampler_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: bigint) => [number, number, number];
    readonly sampler_pair_evals_per_step: (a: number) => number;
    readonly sampler_positions_xy: (a: number) => [number, number];
    readonly sampler_rejection_rate: (a: number) => number;
    readonly sampler_time: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
