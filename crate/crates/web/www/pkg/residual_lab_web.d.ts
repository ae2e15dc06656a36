/* tslint:disable */
/* eslint-disable */

/**
 * Grayscale strip rendered as RGBA, ready for `ImageData`.
 */
export class Strip {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    rgba(): Uint8Array;
    /**
     * NaN when the strip is not a scored cell.
     */
    readonly ap: number;
    readonly height: number;
    readonly width: number;
}

export function equalization(seed: number, size: number): Strip;

export function intensityCurve(seed: number, n_images: number, size: number, radius: number, sigmas: Float64Array): string;

export function scoreCell(seed: number, size: number, kind: string, intensity: number, radius: number, sigma: number, equalize: boolean): Strip;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_strip_free: (a: number, b: number) => void;
    readonly equalization: (a: number, b: number) => [number, number, number];
    readonly intensityCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly scoreCell: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly strip_ap: (a: number) => number;
    readonly strip_height: (a: number) => number;
    readonly strip_rgba: (a: number) => [number, number];
    readonly strip_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
