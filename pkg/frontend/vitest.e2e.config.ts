import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests-e2e/**/*.e2e.test.ts"],
    testTimeout: 300000,
    hookTimeout: 300000,
    // the scripted session is strictly ordered
    sequence: { concurrent: false },
    fileParallelism: false,
  },
});
