/* tslint:disable */
/* eslint-disable */

/**
 * Decodes `prompt` with plain autoregressive decoding and with Token
 * Recycling, returning the text, step counts and TR's per-step spans.
 */
export function compare_decoding(prompt: string, max_new_tokens: number, k: number, nodes: number, depth: number, temperature: number, seed: bigint, init: string): string;

/**
 * Warms a matrix by decoding `prompt`, then shows the matrix row of the
 * last generated token and the draft tree retrieved from it.
 */
export function inspect_draft(prompt: string, max_new_tokens: number, k: number, nodes: number, depth: number): string;

/**
 * MAT over a grid of node counts and depths on the first `cases` shipped
 * bench prompts.
 */
export function sweep(nodes: Uint32Array, depths: Uint32Array, cases: number, max_new_tokens: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly compare_decoding: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint, i: number, j: number) => [number, number, number, number];
    readonly inspect_draft: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly sweep: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
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
