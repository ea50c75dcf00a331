import { describe, expect, it } from "vitest";

import { renderMarkdown } from "../src/markdown.js";

describe("markdown renderer", () => {
  it("renders headings, lists and paragraphs", () => {
    const html = renderMarkdown("# Title\n\nSome text\n\n- one\n- two\n");
    expect(html).toContain("<h1>Title</h1>");
    expect(html).toContain("<p>Some text</p>");
    expect(html).toContain("<ul><li>one</li><li>two</li></ul>");
  });

  it("renders pipe tables with a separator row", () => {
    const html = renderMarkdown(
      "| Defect type | Location |\n| --- | --- |\n| crack | rail head |\n",
    );
    expect(html).toContain("<th>Defect type</th>");
    expect(html).toContain("<td>crack</td>");
    expect(html).toContain("<td>rail head</td>");
  });

  it("keeps fenced code verbatim", () => {
    const html = renderMarkdown("```findings\ncrack | web | high\n```");
    expect(html).toContain("<pre><code>crack | web | high</code></pre>");
  });

  it("escapes embedded html", () => {
    const html = renderMarkdown('hello <script>alert("x")</script>');
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });

  it("renders emphasis and links", () => {
    const html = renderMarkdown("**bold** and *soft* with [docs](https://example.test)");
    expect(html).toContain("<strong>bold</strong>");
    expect(html).toContain("<em>soft</em>");
    expect(html).toContain('<a href="https://example.test">docs</a>');
  });
});
