export {
  BoundStore,
  FormatError,
  QuantFormat,
  STORE_MAGIC,
  SUPPORTED_STORE_VERSION,
  StoreClosedError,
  UnknownImageError,
  ValueMode,
  decodeF16,
  decodeF8,
  open,
} from "./store";
export type { SparseRecord, StoreHeader } from "./store";
export {
  MalformedRegionError,
  TargetMatrix,
  axisWeights,
  batchTargets,
  combine,
  cutmixMix,
  target,
  validateRegion,
  variantTarget,
} from "./pool";
export type { CropRegion, LabelVariant } from "./pool";
