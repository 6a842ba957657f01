/* tslint:disable */
/* eslint-disable */

export class BenchResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Row-major `k × 5k` coupling of one labeler (0 prediction, 1 AOT, 2 CAOT).
     */
    coupling(method: number): Float64Array;
    /**
     * ACC of prediction, AOT and CAOT labels, in that order.
     */
    readonly acc: Float64Array;
    readonly k: number;
    readonly nmi: Float64Array;
}

export class Solution {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly b: Float64Array;
    readonly k: number;
    readonly labels: Uint32Array;
    readonly n: number;
    /**
     * The plan, row-major `n × k`.
     */
    readonly q: Float64Array;
    readonly trace: Float64Array;
}

/**
 * Trains briefly on a synthetic mixture with the given class sizes and
 * compares the three pseudo-labelers.
 */
export function bench(sizes: Uint32Array, noise: number, eps2: number, eps3: number, seed: number): BenchResult;

/**
 * `[ACC, NMI]` of a predicted labeling against ground truth.
 */
export function evaluate(truth: string, pred: string): Float64Array;

export function solve(probs: string, similarity: string, eps1: number, eps2: number, eps3: number): Solution;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_benchresult_free: (a: number, b: number) => void;
    readonly __wbg_solution_free: (a: number, b: number) => void;
    readonly bench: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly benchresult_acc: (a: number) => [number, number];
    readonly benchresult_coupling: (a: number, b: number) => [number, number];
    readonly benchresult_k: (a: number) => number;
    readonly benchresult_nmi: (a: number) => [number, number];
    readonly evaluate: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly solution_b: (a: number) => [number, number];
    readonly solution_k: (a: number) => number;
    readonly solution_labels: (a: number) => [number, number];
    readonly solution_n: (a: number) => number;
    readonly solution_q: (a: number) => [number, number];
    readonly solution_trace: (a: number) => [number, number];
    readonly solve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
