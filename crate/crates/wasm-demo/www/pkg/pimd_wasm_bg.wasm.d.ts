/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_sampler_free: (a: number, b: number) => void;
export const potential_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const ring_spectrum: (a: number, b: number, c: number) => [number, number, number, number];
export const sampler_advance: (a: number, b: number) => [number, number];
export const sampler_kinetic_energy: (a: number) => number;
export const sampler_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: bigint) => [number, number, number];
export const sampler_pair_evals_per_step: (a: number) => number;
export const sampler_positions_xy: (a: number) => [number, number];
export const sampler_rejection_rate: (a: number) => number;
export const sampler_time: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
