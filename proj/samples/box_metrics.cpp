// Prints IoU, GIoU, the GIoU loss and its gradient for a pair of boxes
// given on the command line as x1 y1 x2 y2 x1 y1 x2 y2.
#include <cstdio>
#include <cstdlib>

#include "littleyolo/boxmath.hpp"

int main(int argc, char** argv) {
  using littleyolo::BBox;
  BBox pred{0, 0, 2, 2}, gt{1, 1, 3, 3};
  if (argc == 9) {
    pred = BBox{std::atof(argv[1]), std::atof(argv[2]), std::atof(argv[3]), std::atof(argv[4])}.normalized();
    gt = BBox{std::atof(argv[5]), std::atof(argv[6]), std::atof(argv[7]), std::atof(argv[8])}.normalized();
  }
  const auto b = littleyolo::giou(pred, gt);
  const auto l = littleyolo::giou_loss_with_grad(pred, gt);
  std::printf("I=%g U=%g C=%g\nIoU=%.6f GIoU=%.6f loss=%.6f%s\n", b.intersection, b.union_area,
              b.enclosing_area, b.iou, b.giou, l.loss, b.degenerate ? " (degenerate)" : "");
  std::printf("d loss / d(x1,y1,x2,y2) = (%.6f, %.6f, %.6f, %.6f)\n", l.grad[0], l.grad[1],
              l.grad[2], l.grad[3]);
}
