/* tslint:disable */
/* eslint-disable */

/**
 * Measured and expected operation counts per protocol step.
 */
export function operation_counts(seed: bigint): string;

/**
 * Runs a scenario given as JSON and returns per-phase latency statistics,
 * throughput and outcome counts.
 */
export function run_scenario(config_json: string): string;

/**
 * Issues one token scoped to `scope` (comma separated) for
 * `[start_ms, end_ms]` and `intention`, then presents it twice for
 * `resource` at `now_ms`. The second presentation shows replay handling.
 */
export function token_walkthrough(seed: bigint, scope: string, start_ms: bigint, end_ms: bigint, intention: string, resource: string, presented_intention: string, now_ms: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly operation_counts: (a: bigint) => [number, number];
    readonly run_scenario: (a: number, b: number) => [number, number];
    readonly token_walkthrough: (a: bigint, b: number, c: number, d: bigint, e: bigint, f: number, g: number, h: number, i: number, j: number, k: number, l: bigint) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
