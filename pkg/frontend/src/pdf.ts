/**
 * PDF rendering of a scene.
 *
 * Output is byte-reproducible: the document creation date and file ID
 * are pinned, compression is off, and nothing else in the pipeline is
 * time- or randomness-dependent. Same scene in, same bytes out.
 */

import { jsPDF } from "jspdf";
import { Scene } from "./scene.js";
import { FigureStyle } from "./style.js";

const CREATION_DATE = "D:20000101000000+00'00'";
const FILE_ID = "00000000000000000000000000000000";

export function renderPdf(scene: Scene, style: FigureStyle): Uint8Array {
  // Orientation must match the aspect ratio or the page gets swapped.
  const doc = new jsPDF({
    orientation: scene.width >= scene.height ? "landscape" : "portrait",
    unit: "pt",
    format: [scene.width, scene.height],
    compress: false,
  });
  doc.setCreationDate(CREATION_DATE);
  doc.setFileId(FILE_ID);
  doc.setLineJoin("round");

  for (const p of scene.primitives) {
    switch (p.kind) {
      case "rect":
        doc.setFillColor(p.fill);
        doc.rect(p.x, p.y, p.w, p.h, "F");
        break;

      case "line":
        doc.setDrawColor(p.color);
        doc.setLineWidth(p.width);
        doc.setLineDashPattern(p.dash ?? [], 0);
        doc.line(p.x1, p.y1, p.x2, p.y2);
        break;

      case "path": {
        if (p.points.length < 2) break;
        doc.setDrawColor(p.color);
        doc.setLineWidth(p.width);
        doc.setLineDashPattern(p.dash ?? [], 0);
        doc.lines(deltas(p.points), p.points[0]![0], p.points[0]![1],
                  [1, 1], "S", false);
        break;
      }

      case "polygon":
        doc.setDrawColor(p.color);
        doc.setLineWidth(p.width);
        doc.setLineDashPattern([], 0);
        if (p.fill !== undefined) doc.setFillColor(p.fill);
        doc.lines(deltas(p.points), p.points[0]![0], p.points[0]![1],
                  [1, 1], p.fill !== undefined ? "FD" : "S", true);
        break;

      case "marker":
        if (p.shape === "dot") {
          doc.setFillColor(p.color);
          doc.circle(p.x, p.y, p.size, "F");
        } else {
          doc.setDrawColor(p.color);
          doc.setLineWidth(1.0);
          doc.setLineDashPattern([], 0);
          doc.line(p.x - p.size, p.y - p.size, p.x + p.size, p.y + p.size);
          doc.line(p.x - p.size, p.y + p.size, p.x + p.size, p.y - p.size);
        }
        break;

      case "text":
        doc.setFont(style.fontFamily, p.bold ? "bold" : "normal");
        doc.setFontSize(p.size);
        doc.setTextColor(p.color);
        doc.text(p.text, p.x, p.y,
                 { align: p.align, ...(p.angle ? { angle: p.angle } : {}) });
        break;
    }
  }
  return new Uint8Array(doc.output("arraybuffer"));
}

/** Segment deltas in the form jsPDF.lines expects. */
function deltas(points: [number, number][]): number[][] {
  const out: number[][] = [];
  for (let i = 1; i < points.length; i++) {
    out.push([points[i]![0] - points[i - 1]![0],
              points[i]![1] - points[i - 1]![1]]);
  }
  return out;
}
