import { describe, expect, it } from "vitest";
import { mkdirSync, mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import {
  caseKeyFromFilename,
  loadSliceDataset,
  subjectOfKey,
  zscoreSlice,
  DataError,
} from "../src/data.js";
import { writeNifti, type Volume } from "../src/nifti.js";

describe("case keys", () => {
  it("strips extensions, stage suffixes, and label markers", () => {
    expect(caseKeyFromFilename("P001-1-ED.nii.gz")).toBe("P001-1-ED");
    expect(caseKeyFromFilename("P001-1-ED_preproc.nii.gz")).toBe("P001-1-ED");
    expect(caseKeyFromFilename("P001-1-ED_preproc-label.nii.gz")).toBe("P001-1-ED");
    expect(caseKeyFromFilename("/a/b/P017-4-ES_aug.nii")).toBe("P017-4-ES");
    expect(caseKeyFromFilename("P002-2-ES_pred-label.nii.gz")).toBe("P002-2-ES");
    expect(subjectOfKey("P017-4-ES")).toBe("P017");
  });
});

describe("zscoreSlice", () => {
  it("normalizes to zero mean and unit variance", () => {
    const data = Float32Array.from({ length: 256 }, (_, i) => Math.cos(i) * 7 + 3);
    const z = zscoreSlice(data);
    let mean = 0;
    for (const v of z) mean += v;
    mean /= z.length;
    let varSum = 0;
    for (const v of z) varSum += (v - mean) ** 2;
    expect(Math.abs(mean)).toBeLessThan(1e-5);
    expect(Math.abs(varSum / z.length - 1)).toBeLessThan(1e-4);
  });

  it("keeps constant slices finite", () => {
    const z = zscoreSlice(new Float32Array(64).fill(5));
    for (const v of z) expect(Number.isFinite(v)).toBe(true);
  });
});

function writeCase(dir: string, name: string, fill: number, label: number): void {
  const dims: [number, number, number] = [4, 4, 2];
  const affine = [
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 1, 0],
    [0, 0, 0, 1],
  ];
  const img: Volume = { dims, data: new Float32Array(32).fill(fill), affine };
  img.data[0] = fill + 1; // avoid a constant slice
  const lbl: Volume = { dims, data: new Float32Array(32).fill(label), affine };
  writeNifti(join(dir, `${name}.nii.gz`), img, "float32");
  writeNifti(join(dir, `${name}-label.nii.gz`), lbl, "uint8");
}

describe("loadSliceDataset", () => {
  it("pairs augmented images with the source case's label", () => {
    const work = mkdtempSync(join(tmpdir(), "data-"));
    const pre = join(work, "pre");
    const aug = join(work, "aug");
    mkdirSync(pre);
    mkdirSync(aug);
    writeCase(pre, "P001-1-ED_preproc", 1, 2);
    writeCase(pre, "P002-1-ED_preproc", 2, 3);
    // augmented images only (no labels in the augmented tree)
    const dims: [number, number, number] = [4, 4, 2];
    const affine = [
      [1, 0, 0, 0],
      [0, 1, 0, 0],
      [0, 0, 1, 0],
      [0, 0, 0, 1],
    ];
    const augImg: Volume = { dims, data: new Float32Array(32).fill(9), affine };
    augImg.data[1] = 10;
    writeNifti(join(aug, "P001-1-ED_aug.nii.gz"), augImg, "float32");

    const ds = loadSliceDataset({ imageDirs: [pre, aug], labelDir: pre });
    // 2 clean volumes + 1 augmented volume, 2 slices each
    expect(ds.slices).toHaveLength(6);
    const augSlices = ds.slices.filter((s) => s.sourceDir === aug);
    expect(augSlices).toHaveLength(2);
    for (const s of augSlices) {
      expect(s.caseId).toBe("P001-1-ED");
      expect(Array.from(new Set(s.labels))).toEqual([2]); // label from pre tree
    }
  });

  it("filters by subject and fails on unpaired images", () => {
    const work = mkdtempSync(join(tmpdir(), "data-"));
    const pre = join(work, "pre");
    mkdirSync(pre);
    writeCase(pre, "P001-1-ED_preproc", 1, 1);
    writeCase(pre, "P002-1-ED_preproc", 2, 2);

    const onlyP2 = loadSliceDataset({ imageDirs: [pre], labelDir: pre, subjects: ["P002"] });
    expect(new Set(onlyP2.slices.map((s) => s.caseId))).toEqual(new Set(["P002-1-ED"]));

    expect(() =>
      loadSliceDataset({ imageDirs: [pre], labelDir: pre, subjects: ["P999"] }),
    ).toThrow(DataError);

    const orphan = join(work, "orphan");
    mkdirSync(orphan);
    const dims: [number, number, number] = [4, 4, 2];
    const affine = [
      [1, 0, 0, 0],
      [0, 1, 0, 0],
      [0, 0, 1, 0],
      [0, 0, 0, 1],
    ];
    writeNifti(
      join(orphan, "P003-1-ED_aug.nii.gz"),
      { dims, data: new Float32Array(32), affine },
      "float32",
    );
    expect(() => loadSliceDataset({ imageDirs: [orphan], labelDir: pre })).toThrow(
      /no matching label/,
    );
  });
});
