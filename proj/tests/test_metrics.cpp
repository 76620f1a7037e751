#include <algorithm>
#include <memory>
#include <random>

#include "doctest.h"

#include "detkit/errors.hpp"
#include "detkit/metrics.hpp"
#include "support/generators.hpp"
#include "support/reference_evaluator.hpp"

using detkit::ApInterpolation;
using detkit::BBox;
using detkit::ClassList;
using detkit::Detection;
using detkit::EvalOptions;
using detkit::EvalReport;
using detkit::GroundTruth;

namespace {

BBox from_corners(double x1, double y1, double x2, double y2) {
  return BBox{(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1};
}

Detection det(const std::string& image, int cls, const BBox& box,
              double conf) {
  return Detection{image, cls, box, conf};
}

GroundTruth gt(const std::string& image, int cls, const BBox& box) {
  return GroundTruth{image, cls, box};
}

}  // namespace

TEST_CASE("match_detections greedy claiming") {
  const BBox gt_box = from_corners(0.0, 0.0, 0.5, 0.5);
  const std::vector<GroundTruth> gts{gt("i", 0, gt_box)};

  SUBCASE("clear hit") {
    // IoU = 0.225/0.25 = 0.9
    const std::vector<Detection> dets{
        det("i", 0, from_corners(0.0, 0.0, 0.5, 0.45), 0.8)};
    const auto result = detkit::match_detections(dets, gts, 0, 0.5);
    REQUIRE(result.scored.size() == 1);
    CHECK(result.scored[0] == std::pair<double, bool>{0.8, true});
    CHECK(result.unmatched_gt == 0);
  }

  SUBCASE("higher confidence claims first even at lower IoU") {
    // conf 0.9 at IoU 0.6, conf 0.8 at IoU 0.7
    const std::vector<Detection> dets{
        det("i", 0, from_corners(0.0, 0.0, 0.5, 0.30), 0.9),
        det("i", 0, from_corners(0.0, 0.0, 0.5, 0.35), 0.8)};
    const auto result = detkit::match_detections(dets, gts, 0, 0.5);
    REQUIRE(result.scored.size() == 2);
    CHECK(result.scored[0] == std::pair<double, bool>{0.9, true});
    CHECK(result.scored[1] == std::pair<double, bool>{0.8, false});
    CHECK(result.unmatched_gt == 0);
  }

  SUBCASE("iou below the threshold stays a false positive") {
    // IoU = 0.1225/0.25 = 0.49
    const std::vector<Detection> dets{
        det("i", 0, from_corners(0.0, 0.0, 0.5, 0.245), 0.9)};
    const auto result = detkit::match_detections(dets, gts, 0, 0.5);
    REQUIRE(result.scored.size() == 1);
    CHECK(result.scored[0].second == false);
    CHECK(result.unmatched_gt == 1);
  }

  SUBCASE("other classes are invisible") {
    const std::vector<Detection> dets{
        det("i", 1, gt_box, 0.9)};
    const auto result = detkit::match_detections(dets, gts, 0, 0.5);
    CHECK(result.scored.empty());
    CHECK(result.unmatched_gt == 1);
  }

  SUBCASE("threshold must be in (0,1)") {
    CHECK_THROWS_AS(detkit::match_detections({}, gts, 0, 0.0),
                    detkit::ValidationError);
    CHECK_THROWS_AS(detkit::match_detections({}, gts, 0, 1.0),
                    detkit::ValidationError);
  }
}

TEST_CASE("average precision") {
  SUBCASE("single true positive covering the only instance") {
    const bool flags[] = {true};
    CHECK(detkit::average_precision(flags, 1) == 1.0);
    CHECK(detkit::average_precision(flags, 1,
                                    ApInterpolation::kContinuous) == 1.0);
  }

  SUBCASE("tp then fp with two instances") {
    const bool flags[] = {true, false};
    CHECK(detkit::average_precision(flags, 2) ==
          doctest::Approx(51.0 / 101.0).epsilon(1e-12));
    CHECK(detkit::average_precision(flags, 2, ApInterpolation::kContinuous) ==
          doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("all false positives") {
    const bool flags[] = {false, false, false};
    CHECK(detkit::average_precision(flags, 2) == 0.0);
  }

  SUBCASE("no detections at all") {
    CHECK(detkit::average_precision({}, 3) == 0.0);
  }

  SUBCASE("zero instances must be skipped upstream") {
    const bool flags[] = {true};
    CHECK_THROWS_AS(detkit::average_precision(flags, 0),
                    detkit::ValidationError);
  }

  SUBCASE("late tp keeps envelope credit") {
    const bool flags[] = {false, true};
    // curve: (r=0, p=0), (r=1, p=0.5); envelope 0.5 everywhere
    CHECK(detkit::average_precision(flags, 1) ==
          doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("flipping an fp to tp never decreases ap") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> len(1, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(rng);
    std::vector<bool> flags(n);
    int tp = 0;
    for (int i = 0; i < n; ++i) {
      flags[i] = unit(rng) < 0.5;
      if (flags[i]) ++tp;
    }
    const int total_gt = tp + 1 + static_cast<int>(unit(rng) * 3);
    std::vector<int> fp_positions;
    for (int i = 0; i < n; ++i) {
      if (!flags[i]) fp_positions.push_back(i);
    }
    if (fp_positions.empty()) continue;
    const int flip = fp_positions[static_cast<std::size_t>(
        unit(rng) * double(fp_positions.size()))];

    std::vector<bool> improved = flags;
    improved[static_cast<std::size_t>(flip)] = true;
    const auto ap_of = [&](const std::vector<bool>& v, ApInterpolation mode) {
      const auto buf = std::make_unique<bool[]>(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) buf[i] = v[i];
      return detkit::average_precision({buf.get(), v.size()}, total_gt, mode);
    };
    for (const auto mode :
         {ApInterpolation::kCoco101, ApInterpolation::kContinuous}) {
      CHECK(ap_of(improved, mode) >= ap_of(flags, mode) - 1e-12);
    }
  }
}

TEST_CASE("evaluate") {
  const ClassList classes({"Bottle", "Metal", "Plastic"});

  SUBCASE("perfect detector scores 1.0 everywhere") {
    std::vector<GroundTruth> gts{
        gt("a", 0, BBox{0.3, 0.3, 0.2, 0.2}),
        gt("a", 1, BBox{0.7, 0.7, 0.2, 0.2}),
        gt("b", 2, BBox{0.5, 0.5, 0.4, 0.4}),
    };
    std::vector<Detection> dets;
    for (const auto& g : gts) {
      dets.push_back(det(g.image_id, g.class_id, g.box, 0.9));
    }
    const EvalReport report = detkit::evaluate(dets, gts, classes);
    CHECK(report.evaluated_classes.size() == 3);
    CHECK(report.skipped_classes.empty());
    for (const auto& [cls, m] : report.per_class) {
      CHECK(m.precision == 1.0);
      CHECK(m.recall == 1.0);
      CHECK(m.ap50 == 1.0);
      CHECK(m.ap50_95 == 1.0);
    }
    CHECK(report.precision == 1.0);
    CHECK(report.recall == 1.0);
    CHECK(report.map50 == 1.0);
    CHECK(report.map50_95 == 1.0);
  }

  SUBCASE("zero-instance classes are skipped and excluded from aggregates") {
    const ClassList seven({"Bottle", "Clothes", "Metal", "Plastic", "Rope",
                           "Styrofoam", "Wood"});
    std::vector<GroundTruth> gts;
    std::vector<Detection> dets;
    for (const int cls : {0, 2, 3, 4, 5}) {
      const BBox box{0.1 + 0.15 * cls, 0.5, 0.1, 0.1};
      gts.push_back(gt("a", cls, box));
      dets.push_back(det("a", cls, box, 0.9));
    }
    const EvalReport report = detkit::evaluate(dets, gts, seven);
    CHECK(report.skipped_classes == std::vector<int>{1, 6});
    CHECK(report.evaluated_classes == std::vector<int>{0, 2, 3, 4, 5});
    CHECK(report.per_class.count(1) == 0);
    CHECK(report.map50 == 1.0);  // mean over the five evaluated classes

    // aggregates are the arithmetic mean over evaluated classes only
    double sum = 0.0;
    for (int c : report.evaluated_classes) {
      sum += report.per_class.at(c).ap50;
    }
    CHECK(report.map50 ==
          doctest::Approx(sum / 5.0).epsilon(1e-15));
  }

  SUBCASE("no ground truth at all is an error") {
    std::vector<Detection> dets{det("a", 0, BBox{0.5, 0.5, 0.2, 0.2}, 0.9)};
    CHECK_THROWS_AS(detkit::evaluate(dets, {}, classes),
                    detkit::ValidationError);
  }

  SUBCASE("class ids outside the list are rejected") {
    std::vector<GroundTruth> gts{gt("a", 0, BBox{0.5, 0.5, 0.2, 0.2})};
    std::vector<Detection> dets{det("a", 9, BBox{0.5, 0.5, 0.2, 0.2}, 0.9)};
    CHECK_THROWS_AS(detkit::evaluate(dets, gts, classes),
                    detkit::ValidationError);
  }

  SUBCASE("input order and worker count do not change the report") {
    std::mt19937_64 rng(77);
    const auto data = testsupport::random_micro_dataset(rng);
    const ClassList three({"a", "b", "c"});

    const EvalReport base = detkit::evaluate(data.dets, data.gts, three);

    auto dets = data.dets;
    auto gts = data.gts;
    std::shuffle(dets.begin(), dets.end(), rng);
    std::shuffle(gts.begin(), gts.end(), rng);
    EvalOptions options;
    options.workers = 4;
    const EvalReport shuffled = detkit::evaluate(dets, gts, three, options);

    REQUIRE(base.evaluated_classes == shuffled.evaluated_classes);
    for (int c : base.evaluated_classes) {
      CHECK(base.per_class.at(c).ap50 == shuffled.per_class.at(c).ap50);
      CHECK(base.per_class.at(c).ap50_95 ==
            shuffled.per_class.at(c).ap50_95);
      CHECK(base.per_class.at(c).precision ==
            shuffled.per_class.at(c).precision);
      CHECK(base.per_class.at(c).recall == shuffled.per_class.at(c).recall);
    }
    CHECK(base.map50 == shuffled.map50);
    CHECK(base.map50_95 == shuffled.map50_95);
  }
}

TEST_CASE("evaluate agrees with the naive reference evaluator") {
  std::mt19937_64 rng(20240229);
  const ClassList three({"a", "b", "c"});
  int compared = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const auto data = testsupport::random_micro_dataset(rng);
    const auto reference = testsupport::ref_evaluate(data.dets, data.gts, 3);

    for (const auto interp :
         {ApInterpolation::kCoco101, ApInterpolation::kContinuous}) {
      EvalOptions options;
      options.interpolation = interp;
      const EvalReport report =
          detkit::evaluate(data.dets, data.gts, three, options);

      REQUIRE(report.evaluated_classes.size() == reference.size());
      for (const auto& [cls, ref] : reference) {
        const auto& mine = report.per_class.at(cls);
        CHECK(mine.instances == ref.instances);
        const double ref50 = interp == ApInterpolation::kCoco101
                                 ? ref.ap50_grid
                                 : ref.ap50_area;
        const double ref5095 = interp == ApInterpolation::kCoco101
                                   ? ref.ap50_95_grid
                                   : ref.ap50_95_area;
        CHECK(mine.ap50 == doctest::Approx(ref50).epsilon(1e-9));
        CHECK(mine.ap50_95 == doctest::Approx(ref5095).epsilon(1e-9));
        ++compared;
      }
      CHECK(report.map50_95 <= report.map50 + 1e-12);
    }

    // TP/FP labeling at 0.5 must match exactly
    for (const auto& [cls, ref] : reference) {
      const auto points = detkit::pr_curve(data.dets, data.gts, cls, 0.5);
      REQUIRE(points.size() == ref.tp50.size());
      int tp = 0;
      for (std::size_t k = 0; k < points.size(); ++k) {
        if (ref.tp50[k]) ++tp;
        CHECK(points[k].precision ==
              doctest::Approx(double(tp) / double(k + 1)).epsilon(1e-12));
      }
    }
  }
  CHECK(compared > 200);  // the generator produced real work
}

TEST_CASE("confusion matrix") {
  const ClassList classes({"Bottle", "Metal", "Plastic", "Rope"});

  SUBCASE("perfect detector is the identity on class rows") {
    std::vector<GroundTruth> gts{
        gt("a", 0, BBox{0.2, 0.2, 0.2, 0.2}),
        gt("a", 1, BBox{0.7, 0.7, 0.2, 0.2}),
        gt("b", 2, BBox{0.5, 0.5, 0.4, 0.4}),
        gt("b", 3, BBox{0.1, 0.8, 0.1, 0.1}),
    };
    std::vector<Detection> dets;
    for (const auto& g : gts) {
      dets.push_back(det(g.image_id, g.class_id, g.box, 0.9));
    }
    const auto cm = detkit::confusion_matrix(dets, gts, 4, 0.25, 0.45);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c <= 4; ++c) {
        CHECK(cm.counts(r, c) == (r == c ? 1 : 0));
      }
    }
    CHECK(cm.counts.row(4).sum() == 0);
    const auto norm = cm.normalized();
    for (int r = 0; r < 4; ++r) {
      CHECK(norm(r, r) == 1.0);
    }
  }

  SUBCASE("silent detector sends every row to background") {
    std::vector<GroundTruth> gts{
        gt("a", 0, BBox{0.2, 0.2, 0.2, 0.2}),
        gt("a", 0, BBox{0.7, 0.7, 0.2, 0.2}),
        gt("b", 2, BBox{0.5, 0.5, 0.4, 0.4}),
    };
    const auto cm = detkit::confusion_matrix({}, gts, 4, 0.25, 0.45);
    CHECK(cm.counts(0, 4) == 2);
    CHECK(cm.counts(2, 4) == 1);
    CHECK(cm.total() == 3);
  }

  SUBCASE("cross-class match lands at (gt class, predicted class)") {
    std::vector<GroundTruth> gts{gt("a", 3, BBox{0.5, 0.5, 0.4, 0.4})};
    std::vector<Detection> dets{
        det("a", 2, BBox{0.5, 0.52, 0.4, 0.4}, 0.8)};  // IoU ~ 0.82
    const auto cm = detkit::confusion_matrix(dets, gts, 4, 0.25, 0.45);
    CHECK(cm.counts(3, 2) == 1);
    CHECK(cm.total() == 1);
  }

  SUBCASE("low-confidence detections are discarded first") {
    std::vector<GroundTruth> gts{gt("a", 0, BBox{0.5, 0.5, 0.4, 0.4})};
    std::vector<Detection> dets{
        det("a", 0, BBox{0.5, 0.5, 0.4, 0.4}, 0.10)};
    const auto cm = detkit::confusion_matrix(dets, gts, 4, 0.25, 0.45);
    CHECK(cm.counts(0, 4) == 1);  // gt missed
    CHECK(cm.counts(4, 0) == 0);  // det never counted
  }

  SUBCASE("normalized rows with mass sum to one") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 40; ++trial) {
      const auto data = testsupport::random_micro_dataset(rng);
      const auto cm =
          detkit::confusion_matrix(data.dets, data.gts, 3, 0.25, 0.45);
      const auto norm = cm.normalized();
      for (Eigen::Index r = 0; r < norm.rows(); ++r) {
        if (cm.counts.row(r).sum() > 0) {
          CHECK(norm.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
        } else {
          CHECK(norm.row(r).sum() == 0.0);
        }
      }

      // every ground truth and every surviving unmatched detection counts once
      int surviving = 0;
      for (const auto& d : data.dets) {
        if (d.confidence >= 0.25) ++surviving;
      }
      const auto bg_row = cm.counts.row(cm.background()).sum();
      CHECK(cm.total() ==
            static_cast<std::int64_t>(data.gts.size()) + bg_row);
      std::int64_t non_bg_cols = 0;
      for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
        for (Eigen::Index c = 0; c < cm.counts.cols() - 1; ++c) {
          non_bg_cols += cm.counts(r, c);
        }
      }
      CHECK(non_bg_cols == surviving);
    }
  }

  SUBCASE("threshold validation") {
    CHECK_THROWS_AS(detkit::confusion_matrix({}, {}, 3, 0.0, 0.45),
                    detkit::ValidationError);
    CHECK_THROWS_AS(detkit::confusion_matrix({}, {}, 3, 0.25, 1.0),
                    detkit::ValidationError);
  }
}

TEST_CASE("pr curve") {
  const std::vector<GroundTruth> gts{
      gt("a", 0, BBox{0.3, 0.3, 0.2, 0.2}),
      gt("b", 0, BBox{0.6, 0.6, 0.2, 0.2}),
  };
  const std::vector<Detection> dets{
      det("a", 0, BBox{0.3, 0.3, 0.2, 0.2}, 0.9),   // TP
      det("a", 0, BBox{0.05, 0.9, 0.1, 0.1}, 0.7),  // FP
  };
  const auto points = detkit::pr_curve(dets, gts, 0, 0.5);
  REQUIRE(points.size() == 2);
  CHECK(points[0].confidence == 0.9);
  CHECK(points[0].precision == 1.0);
  CHECK(points[0].recall == 0.5);
  CHECK(points[1].precision == 0.5);
  CHECK(points[1].recall == 0.5);

  CHECK_THROWS_AS(detkit::pr_curve(dets, gts, 1, 0.5),
                  detkit::ValidationError);
}
