/* tslint:disable */
/* eslint-disable */

/**
 * Structure and base-function names usable in problem ids.
 */
export function catalog(): string;

/**
 * Objective on the plane through the optimum spanned by the first two
 * coordinates, `span` wide in each direction (0 = the whole box).
 */
export function landscape(problem_id: string, width: number, height: number, span: number): string;

/**
 * PCA of 2-D points given as `[x0, y0, x1, y1, …]`, with each point rebuilt
 * from its projection on the leading axis.
 */
export function pca_points(flat: Float64Array): string;

/**
 * Runs multi-space and single-space DE with the same seed and budget.
 * `simplified_dim` of 0 uses the default.
 */
export function run_comparison(problem_id: string, population: number, simplified_dim: number, max_fes: bigint, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly catalog: () => [number, number, number, number];
    readonly landscape: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly pca_points: (a: number, b: number) => [number, number, number, number];
    readonly run_comparison: (a: number, b: number, c: number, d: number, e: bigint, f: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
