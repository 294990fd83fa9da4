import { describe, expect, it } from "vitest";

import { escapeHtml, highlightExpansion, renderView } from "../src/render.js";
import { emptyView, addedTokens, tokensOf } from "../src/state.js";

describe("highlightExpansion", () => {
  it("marks only added tokens", () => {
    const html = highlightExpansion("map of usa see territories", ["see", "territories"]);
    expect(html).toBe("map of usa <mark>see</mark> <mark>territories</mark>");
  });

  it("escapes html inside tokens", () => {
    const html = highlightExpansion("a <b>", ["b"]);
    expect(html).toContain("&lt;");
    expect(html).not.toContain("<b>");
  });
});

describe("addedTokens", () => {
  it("diffs expanded against resolved", () => {
    expect(addedTokens("map of usa", "map of usa see territories")).toEqual([
      "see",
      "territories",
    ]);
    expect(addedTokens("same query", "same query")).toEqual([]);
  });

  it("tokenizes case-insensitively", () => {
    expect(tokensOf("Find Me 2024")).toEqual(["find", "me", "2024"]);
  });
});

describe("renderView", () => {
  it("disables both inputs when disconnected", () => {
    const html = renderView(emptyView("mi_clf"));
    expect(html).toContain('data-state="disconnected"');
    expect(html.match(/disabled/g)!.length).toBeGreaterThanOrEqual(4);
  });

  it("escapes transcript text", () => {
    const view = emptyView("mi_clf");
    view.transcript = [{ speaker: "user", kind: "query", text: "<script>alert(1)</script>" }];
    const html = renderView(view);
    expect(html).not.toContain("<script>alert(1)</script>");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("escapeHtml", () => {
  it("escapes the critical characters", () => {
    expect(escapeHtml('<a href="x">&</a>')).toBe("&lt;a href=&quot;x&quot;&gt;&amp;&lt;/a&gt;");
  });
});
