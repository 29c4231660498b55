/* tslint:disable */
/* eslint-disable */

/**
 * Capacity plan as JSON.
 */
export function plan(model_json: string, r_target: number, horizon: number): string;

/**
 * Rate function values at `xs`; `k < 0` selects the limit.
 */
export function rate_curve(model_json: string, k: number, xs: Float64Array): Float64Array;

/**
 * Simulates one path and reports the segment averages over a trailing
 * window, the `R_t` trajectory and `T_r` for `A = (c_p, inf)`, as JSON.
 */
export function simulate_segments(model_json: string, seed: number, t_max: number, c_p: number, window: number, r: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly plan: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly rate_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly simulate_segments: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
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
