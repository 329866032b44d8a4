/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const operation_counts: (a: bigint) => [number, number];
export const run_scenario: (a: number, b: number) => [number, number];
export const token_walkthrough: (a: bigint, b: number, c: number, d: bigint, e: bigint, f: number, g: number, h: number, i: number, j: number, k: number, l: bigint) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
