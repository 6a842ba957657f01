/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_benchresult_free: (a: number, b: number) => void;
export const __wbg_solution_free: (a: number, b: number) => void;
export const bench: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const benchresult_acc: (a: number) => [number, number];
export const benchresult_coupling: (a: number, b: number) => [number, number];
export const benchresult_k: (a: number) => number;
export const benchresult_nmi: (a: number) => [number, number];
export const evaluate: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const solution_b: (a: number) => [number, number];
export const solution_k: (a: number) => number;
export const solution_labels: (a: number) => [number, number];
export const solution_n: (a: number) => number;
export const solution_q: (a: number) => [number, number];
export const solution_trace: (a: number) => [number, number];
export const solve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
