export { initBackend, tf } from "./backend.js";
export { mulberry32, seedSequence, shuffle } from "./rng.js";
export { readNifti, writeNifti, spacingFromAffine, NiftiError, type Volume } from "./nifti.js";
export { makePhantoms, PhantomError, MIN_PHANTOM_SIZE, type PhantomSpec, type PhantomCase } from "./phantom.js";
export { crossEntropy, softDiceLoss, segLoss, diceFromLabels } from "./loss.js";
export { GroupedAdam, type GroupSpec, type GroupInfo } from "./optim.js";
export { ReduceLROnPlateau, type PlateauOptions } from "./scheduler.js";
export { ShapeError, assertDivisible } from "./blocks.js";
export { buildScratchUNet, DEFAULT_GROWTH, type ScratchUNet } from "./unet.js";
export {
  buildPretrainedUNet,
  RESNET101_STAGES,
  DEFAULT_DECODER_CHANNELS,
  type PretrainedUNet,
} from "./resnet.js";
export {
  buildModel,
  makeOptimizer,
  saveWeights,
  loadWeights,
  snapshotWeights,
  restoreWeights,
  type ModelSpec,
  type SegModel,
  type Variant,
} from "./model.js";
export {
  loadSliceDataset,
  concatDatasets,
  caseKeyFromFilename,
  subjectOfKey,
  zscoreSlice,
  caseIds,
  DataError,
  type SliceDataset,
  type SliceSample,
} from "./data.js";
export {
  trainModel,
  evaluateOnDataset,
  TrainAbortError,
  type TrainConfig,
  type TrainResult,
  type EpochLog,
} from "./train.js";
export { predictVolume, predictToFile } from "./predict.js";
export { cmrpipe, cmrpipeAvailable, CmrpipeError } from "./cmrpipe.js";
export { runAblation, AblationError, type AblationOptions, type AblationResult } from "./ablation.js";
