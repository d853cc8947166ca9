#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "msds/geometry.hpp"

namespace msds {

class LeafNode;

/// Leaf child wrapping one dataset's spatial set.
struct DatasetNode {
    SpatialSet set;
    LeafNode* parent = nullptr;

    const std::string& id() const { return set.dataset_id; }
    const Rect& rect() const { return set.mbr; }
    PivotBall ball() const { return set.ball(); }
};

enum class NodeKind : std::uint8_t { Internal = 0, Leaf = 1 };

class TreeNode {
  public:
    explicit TreeNode(NodeKind kind) : kind_(kind) {}
    virtual ~TreeNode() = default;

    NodeKind kind() const { return kind_; }
    bool is_leaf() const { return kind_ == NodeKind::Leaf; }

    Rect rect;
    Vec2 pivot;
    double radius = 0.0;
    TreeNode* parent = nullptr;

    void refresh_ball() {
        PivotBall b = rect_ball(rect);
        pivot = b.pivot;
        radius = b.radius;
    }
    PivotBall ball() const { return {pivot, radius}; }

  private:
    NodeKind kind_;
};

class InternalNode : public TreeNode {
  public:
    InternalNode() : TreeNode(NodeKind::Internal) {}

    std::unique_ptr<TreeNode> left;
    std::unique_ptr<TreeNode> right;
};

struct PostingEntry {
    CellId cell = 0;
    std::vector<std::uint32_t> datasets; // indices into the owning leaf's children, ascending
};

class LeafNode : public TreeNode {
  public:
    LeafNode() : TreeNode(NodeKind::Leaf) {}

    std::vector<std::unique_ptr<DatasetNode>> children;
    std::vector<PostingEntry> inv; // sorted by cell

    const std::vector<std::uint32_t>* posting(CellId c) const;
    void rebuild_inverted();
    void refresh_rect_from_children();

  private:
    friend class IBtree;
    void add_to_inverted(CellId c, std::uint32_t child_idx);
    void remove_from_inverted(std::span<const CellId> cells, std::uint32_t child_idx);
};

/// Inverted-ball tree over one data source: a binary ball/MBR tree whose
/// leaves (capacity f) carry inverted indexes from cell id to child datasets.
class IBtree {
  public:
    IBtree(GridConfig grid, std::uint32_t capacity);

    static IBtree build(std::vector<SpatialSet> sets, std::uint32_t capacity,
                        const GridConfig& grid);

    void insert(SpatialSet set);
    void update(SpatialSet set);

    const DatasetNode* find(std::string_view id) const;
    bool contains(std::string_view id) const { return find(id) != nullptr; }

    const TreeNode* root() const { return root_.get(); }
    const GridConfig& grid() const { return grid_; }
    std::uint32_t capacity() const { return capacity_; }
    std::uint64_t generation() const { return generation_; }
    std::uint64_t content_fingerprint() const { return content_fp_; }
    std::size_t dataset_count() const { return directory_.size(); }
    bool empty() const { return root_ == nullptr; }

    std::size_t leaf_count() const;
    std::size_t depth() const;
    std::vector<std::string> dataset_ids_sorted() const;

    template <typename F>
    void for_each_leaf(F&& fn) const {
        walk_leaves(root_.get(), fn);
    }

    /// Leaves whose subtree may hold a set within delta of the probe, i.e.
    /// the unclamped ball-distance lower bound is < delta.
    std::vector<const LeafNode*> collect_leaves_within(const PivotBall& probe,
                                                       double delta) const;

    std::vector<std::uint8_t> serialize() const;
    static IBtree deserialize(std::span<const std::uint8_t> bytes);

  private:
    GridConfig grid_;
    std::uint32_t capacity_ = 0;
    std::uint64_t generation_ = 0;
    std::uint64_t content_fp_ = 0;
    std::unique_ptr<TreeNode> root_;
    std::unordered_map<std::string, DatasetNode*> directory_;

    static std::unique_ptr<TreeNode> build_subtree(std::vector<std::unique_ptr<DatasetNode>> nodes,
                                                   std::uint32_t capacity);
    void register_subtree(TreeNode* node);
    void split_leaf(LeafNode* leaf);
    static void expand_upward(TreeNode* node);

    template <typename F>
    static void walk_leaves(const TreeNode* node, F& fn) {
        if (node == nullptr) return;
        if (node->is_leaf()) {
            fn(static_cast<const LeafNode&>(*node));
            return;
        }
        const auto& in = static_cast<const InternalNode&>(*node);
        walk_leaves(in.left.get(), fn);
        walk_leaves(in.right.get(), fn);
    }
};

/// Raw pivot-ball distance bound without the zero clamp; negative when the
/// balls overlap. This is the survival test used by all tree descents.
double ball_gap(const PivotBall& a, const PivotBall& b);

std::uint64_t hash_spatial_set(const SpatialSet& s);

} // namespace msds
