/* tslint:disable */
/* eslint-disable */

export function ctcView(target: string, frames: number, seed: number): string;

export function metricsView(a: string, b: string): string;

export function pcaView(text: string, seed: number, retention: number, mode: string): string;

/**
 * Pass a negative `retention` for the untouched utterance.
 */
export function pcaWav(text: string, seed: number, retention: number, mode: string): Uint8Array;

export function reduceAlignment(alignment: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly ctcView: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly metricsView: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly pcaView: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly pcaWav: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly reduceAlignment: (a: number, b: number) => [number, number, number, number];
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
