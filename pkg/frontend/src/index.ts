export * from "./types";
export { ApiError, ReviewClient } from "./client";
export {
  heatmapCells,
  hasTrendData,
  renderHeatmap,
  renderStackedArea,
  renderTrends,
  stackedSeries,
  topicLabel,
} from "./trends";
export type { HeatmapCell, StackBand, StackedSeries } from "./trends";
export { cloudEntries, renderWordCloud } from "./wordcloud";
export type { CloudEntry, CloudOptions } from "./wordcloud";
export { itemState, renderQueueItem, ScreeningQueue } from "./queue";
export type { ItemState, QueueItem, SubmitOutcome } from "./queue";
export { ChatPanel, renderChat, renderMessage } from "./chat";
export type { ChatMessage } from "./chat";
export { loadAppData, mount, renderApp } from "./app";
export type { AppData, MountOptions } from "./app";
