/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_strip_free: (a: number, b: number) => void;
export const equalization: (a: number, b: number) => [number, number, number];
export const intensityCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const scoreCell: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
export const strip_ap: (a: number) => number;
export const strip_height: (a: number) => number;
export const strip_rgba: (a: number) => [number, number];
export const strip_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
