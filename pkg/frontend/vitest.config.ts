import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    environment: "node",
    // roundtrip.test.ts boots the real service and fits a model
    testTimeout: 60_000,
    hookTimeout: 120_000,
  },
});
