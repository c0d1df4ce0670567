/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const attenuation: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const bond_distances: () => [number, number];
export const shift_rule: (a: number, b: number, c: bigint) => [number, number, number, number];
export const vqe_trace: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
